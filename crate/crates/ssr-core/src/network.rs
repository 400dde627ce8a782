//! Linearized electrical coupling: DC susceptance matrix, Kron reduction of
//! load buses, and the steady-state DC power flow.
//!
//! With the slack angle fixed at zero and non-slack load-bus angles
//! eliminated, generator electrical power becomes
//! `P_e = A_e * theta_g + B_e * L` with `A_e` the reduced susceptance
//! Laplacian and `B_e` mapping load consumption to generator power.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{BusRole, NetworkModel, SystemModel, MASSES_PER_SHAFT};

/// DC susceptance Laplacian over all buses, in bus declaration order.
#[derive(Debug, Clone)]
pub struct SusceptanceMatrix {
    pub matrix: DMatrix<f64>,
    pub bus_ids: Vec<String>,
}

impl SusceptanceMatrix {
    pub fn index_of(&self, bus: &str) -> Option<usize> {
        self.bus_ids.iter().position(|b| b == bus)
    }
}

/// Reduced coupling `P_e = A_e * theta + B_e * L`.
///
/// `a_e` is n_gen x 5*n_gen over the stacked angle states; only the
/// terminal-angle columns (the first n_gen) are nonzero. `b_e` has one
/// column per load bus (declaration order); the slack column is zero.
#[derive(Debug, Clone)]
pub struct ReducedCoupling {
    pub a_e: DMatrix<f64>,
    pub b_e: DMatrix<f64>,
    pub gen_ids: Vec<String>,
    pub load_bus_ids: Vec<String>,
}

impl ReducedCoupling {
    /// The n_gen x n_gen terminal-angle block of `a_e`.
    pub fn terminal_block(&self) -> DMatrix<f64> {
        let n = self.gen_ids.len();
        self.a_e.columns(0, n).into_owned()
    }

    /// Coupling with no electrical network (isolated shafts); useful for
    /// analyzing the torsional modes of the machines alone.
    pub fn decoupled(model: &SystemModel) -> ReducedCoupling {
        let n = model.n_generators();
        let load_bus_ids: Vec<String> = model.load_buses().iter().map(|b| b.id.clone()).collect();
        ReducedCoupling {
            a_e: DMatrix::zeros(n, MASSES_PER_SHAFT * n),
            b_e: DMatrix::zeros(n, load_bus_ids.len()),
            gen_ids: model.generators.iter().map(|g| g.id.clone()).collect(),
            load_bus_ids,
        }
    }
}

/// Assemble the susceptance Laplacian: off-diagonal (i,j) = -sum of 1/x over
/// lines i-j, diagonal = sum of incident 1/x. Rows sum to zero.
pub fn build_susceptance(network: &NetworkModel) -> SusceptanceMatrix {
    let n = network.buses.len();
    let mut m = DMatrix::zeros(n, n);
    let index = |id: &str| network.buses.iter().position(|b| b.id == id);
    for line in &network.lines {
        let (i, j) = (index(&line.from).unwrap(), index(&line.to).unwrap());
        let y = 1.0 / line.x_pu;
        m[(i, i)] += y;
        m[(j, j)] += y;
        m[(i, j)] -= y;
        m[(j, i)] -= y;
    }
    SusceptanceMatrix {
        matrix: m,
        bus_ids: network.buses.iter().map(|b| b.id.clone()).collect(),
    }
}

fn partition(model: &SystemModel, b: &SusceptanceMatrix) -> (Vec<usize>, Vec<usize>, Vec<String>) {
    // Generator bus indices in generator declaration order.
    let gen_rows: Vec<usize> = model
        .generators
        .iter()
        .map(|g| b.index_of(&g.bus).expect("generator bus present"))
        .collect();
    // Non-slack load buses in bus declaration order.
    let mut nonslack_rows = Vec::new();
    let mut nonslack_ids = Vec::new();
    for bus in &model.network.buses {
        if bus.role == BusRole::Load {
            nonslack_rows.push(b.index_of(&bus.id).unwrap());
            nonslack_ids.push(bus.id.clone());
        }
    }
    (gen_rows, nonslack_rows, nonslack_ids)
}

fn select(b: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| b[(rows[i], cols[j])])
}

/// Eliminate non-slack load-bus angles (slack grounded) and return the
/// reduced coupling. Fails if the load-bus submatrix is singular.
pub fn kron_reduce(b: &SusceptanceMatrix, model: &SystemModel) -> Result<ReducedCoupling> {
    let n = model.n_generators();
    let (gen_rows, load_rows, load_ids) = partition(model, b);
    let b_gg = select(&b.matrix, &gen_rows, &gen_rows);

    // with no non-slack load buses there is nothing to eliminate
    let (a_core, b_e_nonslack) = if load_rows.is_empty() {
        (b_gg, DMatrix::zeros(n, 0))
    } else {
        let b_gl = select(&b.matrix, &gen_rows, &load_rows);
        let b_lg = select(&b.matrix, &load_rows, &gen_rows);
        let b_ll = select(&b.matrix, &load_rows, &load_rows);
        let lu = b_ll.lu();
        let x_lg = lu
            .solve(&b_lg)
            .ok_or_else(|| Error::SingularLoadSubmatrix(load_ids.clone()))?;
        let ident = DMatrix::identity(load_rows.len(), load_rows.len());
        let b_ll_inv = lu
            .solve(&ident)
            .ok_or_else(|| Error::SingularLoadSubmatrix(load_ids.clone()))?;
        (&b_gg - &b_gl * x_lg, -(&b_gl * b_ll_inv))
    };

    // Expand to the stacked angle layout (terminal columns first) and to all
    // load buses (zero column for the slack).
    let mut a_e = DMatrix::zeros(n, MASSES_PER_SHAFT * n);
    a_e.view_mut((0, 0), (n, n)).copy_from(&a_core);
    let load_buses = model.load_buses();
    let mut b_e = DMatrix::zeros(n, load_buses.len());
    for (col, bus) in load_buses.iter().enumerate() {
        if let Some(src) = load_ids.iter().position(|id| *id == bus.id) {
            b_e.column_mut(col).copy_from(&b_e_nonslack.column(src));
        }
    }
    Ok(ReducedCoupling {
        a_e,
        b_e,
        gen_ids: model.generators.iter().map(|g| g.id.clone()).collect(),
        load_bus_ids: load_buses.iter().map(|b| b.id.clone()).collect(),
    })
}

/// Same reduction done one bus at a time with the scalar Kron formula
/// `b'_ij = b_ij - b_ik * b_kj / b_kk`; load columns are carried through the
/// elimination. Cross-checks the one-shot Schur route.
pub fn kron_reduce_sequential(b: &SusceptanceMatrix, model: &SystemModel) -> Result<ReducedCoupling> {
    let n = model.n_generators();
    let (gen_rows, load_rows, load_ids) = partition(model, b);
    let nb = b.matrix.nrows();

    // Augmented system: P_inj = B*theta with injections P_g at generator
    // rows and -L at load rows; eliminating theta_k moves its load term onto
    // the neighbors. `c` tracks the -L coefficients per remaining row.
    let mut m = b.matrix.clone();
    let mut c = DMatrix::zeros(nb, load_rows.len());
    for (j, &r) in load_rows.iter().enumerate() {
        c[(r, j)] = -1.0;
    }
    let mut alive: Vec<bool> = vec![true; nb];
    for (j, &k) in load_rows.iter().enumerate() {
        let pivot = m[(k, k)];
        if pivot.abs() < 1e-12 {
            return Err(Error::SingularLoadSubmatrix(load_ids[j..].to_vec()));
        }
        for i in 0..nb {
            if i == k || !alive[i] {
                continue;
            }
            let factor = m[(i, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for col in 0..nb {
                let v = m[(k, col)];
                m[(i, col)] -= factor * v;
            }
            for col in 0..load_rows.len() {
                let v = c[(k, col)];
                c[(i, col)] -= factor * v;
            }
        }
        alive[k] = false;
    }

    // Remaining rows over generator buses: P_g = A*theta_g + (load terms).
    // P_g row reads  m*theta + c*(-? ) ... with P_inj convention the loads
    // arrive as +B_e * L after moving c to the right-hand side.
    let mut a_core = DMatrix::zeros(n, n);
    let mut b_e_ns = DMatrix::zeros(n, load_rows.len());
    for (gi, &r) in gen_rows.iter().enumerate() {
        for (gj, &cidx) in gen_rows.iter().enumerate() {
            a_core[(gi, gj)] = m[(r, cidx)];
        }
        for j in 0..load_rows.len() {
            b_e_ns[(gi, j)] = -c[(r, j)];
        }
    }

    let mut a_e = DMatrix::zeros(n, MASSES_PER_SHAFT * n);
    a_e.view_mut((0, 0), (n, n)).copy_from(&a_core);
    let load_buses = model.load_buses();
    let mut b_e = DMatrix::zeros(n, load_buses.len());
    for (col, bus) in load_buses.iter().enumerate() {
        if let Some(src) = load_ids.iter().position(|id| *id == bus.id) {
            b_e.column_mut(col).copy_from(&b_e_ns.column(src));
        }
    }
    Ok(ReducedCoupling {
        a_e,
        b_e,
        gen_ids: model.generators.iter().map(|g| g.id.clone()).collect(),
        load_bus_ids: load_buses.iter().map(|b| b.id.clone()).collect(),
    })
}

/// Steady-state DC power flow: bus angles (radians, slack = 0) solving the
/// full linear balance, in bus declaration order. Independent of the Kron
/// route, so it doubles as that route's oracle.
pub fn steady_state_angles(b: &SusceptanceMatrix, model: &SystemModel) -> Result<Vec<f64>> {
    let nb = b.matrix.nrows();
    let slack = model
        .network
        .buses
        .iter()
        .position(|bus| bus.role == BusRole::Slack)
        .ok_or_else(|| Error::model("no slack bus"))?;

    let mut injection = vec![0.0; nb];
    for g in &model.generators {
        injection[b.index_of(&g.bus).unwrap()] += g.dispatch_mw / model.network.base_mva;
    }
    for (bus, mw) in &model.network.loads {
        injection[b.index_of(bus).unwrap()] -= mw / model.network.base_mva;
    }

    let keep: Vec<usize> = (0..nb).filter(|&i| i != slack).collect();
    let reduced = select(&b.matrix, &keep, &keep);
    let rhs = DVector::from_iterator(keep.len(), keep.iter().map(|&i| injection[i]));
    let sol = reduced
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("DC power flow system".to_string()))?;

    let mut angles = vec![0.0; nb];
    for (k, &i) in keep.iter().enumerate() {
        angles[i] = sol[k];
    }
    Ok(angles)
}

/// Flow on a line in p.u., positive from `from` to `to`.
pub fn line_flow(b: &SusceptanceMatrix, angles: &[f64], from: &str, to: &str, x_pu: f64) -> f64 {
    let i = b.index_of(from).unwrap();
    let j = b.index_of(to).unwrap();
    (angles[i] - angles[j]) / x_pu
}

//! Assembly of the full electromechanical LTI system
//! `x_dot = A x + B L`, `x = [omega; theta]` of length 10n, with terminal
//! outputs y1 = x and torsional difference outputs y2, plus eigen-mode
//! extraction.
//!
//! State stacking puts all terminal speeds first, then shaft-section speeds
//! generator by generator, then angles in the same pattern. The lower blocks
//! are structural: A21 = I (theta_dot = omega) and A22 = 0.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{GeneratorModel, SystemModel, MASSES_PER_SHAFT, SEGMENTS_PER_SHAFT};
use crate::network::ReducedCoupling;

/// One mass on the five-mass shaft.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mass {
    G,
    S1,
    S2,
    S3,
    S4,
}

impl Mass {
    pub const ALL: [Mass; 5] = [Mass::G, Mass::S1, Mass::S2, Mass::S3, Mass::S4];

    pub fn ordinal(self) -> usize {
        match self {
            Mass::G => 0,
            Mass::S1 => 1,
            Mass::S2 => 2,
            Mass::S3 => 3,
            Mass::S4 => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mass::G => "g",
            Mass::S1 => "s1",
            Mass::S2 => "s2",
            Mass::S3 => "s3",
            Mass::S4 => "s4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Speed,
    Angle,
}

/// Bijection between (generator, mass, kind) and state index.
#[derive(Debug, Clone)]
pub struct StateIndexMap {
    gen_ids: Vec<String>,
}

impl StateIndexMap {
    pub fn new(gen_ids: Vec<String>) -> StateIndexMap {
        StateIndexMap { gen_ids }
    }

    pub fn n_generators(&self) -> usize {
        self.gen_ids.len()
    }

    pub fn size(&self) -> usize {
        2 * MASSES_PER_SHAFT * self.gen_ids.len()
    }

    pub fn gen_ids(&self) -> &[String] {
        &self.gen_ids
    }

    /// State index of (generator, mass, kind) under the stacking
    /// [w_g1..w_gn, w_g1s1..w_gns4, th_g1..th_gn, th_g1s1..th_gns4].
    pub fn index(&self, gen: usize, mass: Mass, kind: VarKind) -> usize {
        let n = self.gen_ids.len();
        let speed = match mass {
            Mass::G => gen,
            m => n + SEGMENTS_PER_SHAFT * gen + (m.ordinal() - 1),
        };
        match kind {
            VarKind::Speed => speed,
            VarKind::Angle => MASSES_PER_SHAFT * n + speed,
        }
    }

    pub fn decode(&self, index: usize) -> (usize, Mass, VarKind) {
        let n = self.gen_ids.len();
        let half = MASSES_PER_SHAFT * n;
        let (kind, pos) = if index < half {
            (VarKind::Speed, index)
        } else {
            (VarKind::Angle, index - half)
        };
        if pos < n {
            (pos, Mass::G, kind)
        } else {
            let rest = pos - n;
            let gen = rest / SEGMENTS_PER_SHAFT;
            let mass = Mass::ALL[rest % SEGMENTS_PER_SHAFT + 1];
            (gen, mass, kind)
        }
    }

    /// Stable column id, e.g. `w_G1`, `w_G1_s3`, `th_G2`.
    pub fn label(&self, index: usize) -> String {
        let (gen, mass, kind) = self.decode(index);
        let prefix = match kind {
            VarKind::Speed => "w",
            VarKind::Angle => "th",
        };
        match mass {
            Mass::G => format!("{prefix}_{}", self.gen_ids[gen]),
            m => format!("{prefix}_{}_{}", self.gen_ids[gen], m.label()),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.size()).map(|i| self.label(i)).collect()
    }
}

/// Index map for the torsional difference outputs y2 = [d_omega; d_theta]:
/// per generator the four adjacent-mass differences (g-s1, s1-s2, s2-s3,
/// s3-s4), speed block first, generator-major.
#[derive(Debug, Clone)]
pub struct OutputIndexMap {
    gen_ids: Vec<String>,
}

impl OutputIndexMap {
    pub fn new(gen_ids: Vec<String>) -> OutputIndexMap {
        OutputIndexMap { gen_ids }
    }

    pub fn size(&self) -> usize {
        2 * SEGMENTS_PER_SHAFT * self.gen_ids.len()
    }

    pub fn index(&self, gen: usize, segment: usize, kind: VarKind) -> usize {
        let n = self.gen_ids.len();
        let base = SEGMENTS_PER_SHAFT * gen + segment;
        match kind {
            VarKind::Speed => base,
            VarKind::Angle => SEGMENTS_PER_SHAFT * n + base,
        }
    }

    pub fn decode(&self, index: usize) -> (usize, usize, VarKind) {
        let n = self.gen_ids.len();
        let half = SEGMENTS_PER_SHAFT * n;
        let (kind, pos) = if index < half {
            (VarKind::Speed, index)
        } else {
            (VarKind::Angle, index - half)
        };
        (pos / SEGMENTS_PER_SHAFT, pos % SEGMENTS_PER_SHAFT, kind)
    }

    /// Stable column id, e.g. `dw_G1_g_s1`, `dth_G2_s3_s4`.
    pub fn label(&self, index: usize) -> String {
        let (gen, seg, kind) = self.decode(index);
        let prefix = match kind {
            VarKind::Speed => "dw",
            VarKind::Angle => "dth",
        };
        let (a, b) = (Mass::ALL[seg].label(), Mass::ALL[seg + 1].label());
        format!("{prefix}_{}_{}_{}", self.gen_ids[gen], a, b)
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.size()).map(|i| self.label(i)).collect()
    }
}

/// Full LTI system with both output maps.
#[derive(Debug, Clone)]
pub struct StateSpaceSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub state_map: StateIndexMap,
    pub output_map: OutputIndexMap,
    /// Bus ids of the input (load) columns of `b`.
    pub input_bus_ids: Vec<String>,
    /// Ratio pairing (torsional output row, terminal output row): every
    /// speed difference against its generator's terminal speed, every angle
    /// difference against the terminal angle.
    pub ratio_pairing: Vec<(usize, usize)>,
    y1_labels: Vec<String>,
    y2_labels: Vec<String>,
}

impl StateSpaceSystem {
    /// Build from raw matrices with dimension checks; used for hand-built
    /// systems in analysis and tests.
    pub fn from_parts(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c2: DMatrix<f64>,
        state_map: StateIndexMap,
        output_map: OutputIndexMap,
        input_bus_ids: Vec<String>,
        ratio_pairing: Vec<(usize, usize)>,
    ) -> Result<StateSpaceSystem> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension {
                context: "state matrix".into(),
                expected: n,
                found: a.ncols(),
            });
        }
        if b.nrows() != n {
            return Err(Error::Dimension {
                context: "input matrix rows".into(),
                expected: n,
                found: b.nrows(),
            });
        }
        if c2.ncols() != n {
            return Err(Error::Dimension {
                context: "torsional output matrix columns".into(),
                expected: n,
                found: c2.ncols(),
            });
        }
        if b.ncols() != input_bus_ids.len() {
            return Err(Error::Dimension {
                context: "input bus ids".into(),
                expected: b.ncols(),
                found: input_bus_ids.len(),
            });
        }
        let n_out2 = c2.nrows();
        if ratio_pairing.len() != n_out2 {
            return Err(Error::Dimension {
                context: "ratio pairing".into(),
                expected: n_out2,
                found: ratio_pairing.len(),
            });
        }
        let n_in = b.ncols();
        let y1_labels = if state_map.size() == n {
            state_map.labels()
        } else {
            (0..n).map(|i| format!("x{i}")).collect()
        };
        let y2_labels = if output_map.size() == n_out2 {
            output_map.labels()
        } else {
            (0..n_out2).map(|i| format!("y{i}")).collect()
        };
        Ok(StateSpaceSystem {
            c1: DMatrix::identity(n, n),
            d1: DMatrix::zeros(n, n_in),
            d2: DMatrix::zeros(n_out2, n_in),
            a,
            b,
            c2,
            state_map,
            output_map,
            input_bus_ids,
            ratio_pairing,
            y1_labels,
            y2_labels,
        })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    /// Column of `b` corresponding to a load bus.
    pub fn input_index(&self, bus: &str) -> Option<usize> {
        self.input_bus_ids.iter().position(|b| b == bus)
    }

    pub fn y1_labels(&self) -> Vec<String> {
        self.y1_labels.clone()
    }

    pub fn y2_labels(&self) -> Vec<String> {
        self.y2_labels.clone()
    }

    pub fn eig_modes(&self) -> Result<ModeSet> {
        eig_modes_of(&self.a, &self.y1_labels())
    }
}

/// Input-power distribution matrix B_I = [I; B_F] (5n x n): identity over
/// terminal rows, block-diagonal per-generator power-fraction columns over
/// the turbine rows.
pub fn build_input_map(generators: &[GeneratorModel]) -> DMatrix<f64> {
    let n = generators.len();
    let map = StateIndexMap::new(generators.iter().map(|g| g.id.clone()).collect());
    let mut b_i = DMatrix::zeros(MASSES_PER_SHAFT * n, n);
    for (g, gen) in generators.iter().enumerate() {
        b_i[(map.index(g, Mass::G, VarKind::Speed), g)] = 1.0;
        for (s, &frac) in gen.shaft.power_fractions.iter().enumerate() {
            b_i[(map.index(g, Mass::ALL[s + 1], VarKind::Speed), g)] = frac;
        }
    }
    b_i
}

/// Torsional output matrices: C1 = I (y1 = x), and C2 selecting the
/// adjacent-mass speed and angle differences.
pub fn assemble_outputs(state_map: &StateIndexMap, output_map: &OutputIndexMap) -> (DMatrix<f64>, DMatrix<f64>) {
    let n_states = state_map.size();
    let c1 = DMatrix::identity(n_states, n_states);
    let mut c2 = DMatrix::zeros(output_map.size(), n_states);
    for gen in 0..state_map.n_generators() {
        for seg in 0..SEGMENTS_PER_SHAFT {
            for kind in [VarKind::Speed, VarKind::Angle] {
                let row = output_map.index(gen, seg, kind);
                c2[(row, state_map.index(gen, Mass::ALL[seg], kind))] = 1.0;
                c2[(row, state_map.index(gen, Mass::ALL[seg + 1], kind))] = -1.0;
            }
        }
    }
    (c1, c2)
}

/// Assemble the full system from a validated model and its reduced coupling.
///
/// Speed rows carry, scaled by omega_0m / (2 H_i): the damping diagonal, the
/// pentadiagonal shaft-stiffness coupling, and (on generator-mass rows only,
/// since mechanical power deviations are zero without a governor) the
/// electrical terms -A_e * theta and -B_e * L.
pub fn assemble(model: &SystemModel, coupling: &ReducedCoupling) -> Result<StateSpaceSystem> {
    let n = model.n_generators();
    if coupling.gen_ids.len() != n {
        return Err(Error::Dimension {
            context: "coupling generator count".into(),
            expected: n,
            found: coupling.gen_ids.len(),
        });
    }
    if coupling.a_e.nrows() != n || coupling.a_e.ncols() != MASSES_PER_SHAFT * n {
        return Err(Error::Dimension {
            context: "A_e".into(),
            expected: MASSES_PER_SHAFT * n,
            found: coupling.a_e.ncols(),
        });
    }

    let state_map = StateIndexMap::new(model.generators.iter().map(|g| g.id.clone()).collect());
    let output_map = OutputIndexMap::new(model.generators.iter().map(|g| g.id.clone()).collect());
    let half = MASSES_PER_SHAFT * n;
    let n_states = 2 * half;
    let omega = model.omega_0m;

    let mut a = DMatrix::zeros(n_states, n_states);

    // Per-mass scale factors omega_0m / (2 H_i), in speed-row order.
    let mut scale = vec![0.0; half];
    for (g, gen) in model.generators.iter().enumerate() {
        for mass in Mass::ALL {
            let row = state_map.index(g, mass, VarKind::Speed);
            scale[row] = omega / (2.0 * gen.shaft.inertias[mass.ordinal()]);
        }
    }

    // A11: damping diagonal.
    for (g, gen) in model.generators.iter().enumerate() {
        for mass in Mass::ALL {
            let row = state_map.index(g, mass, VarKind::Speed);
            a[(row, row)] = -scale[row] * gen.shaft.dampings[mass.ordinal()];
        }
    }

    // A12: shaft-stiffness chain. Torque on mass m from segment (m, m+1)
    // with stiffness K is K * (theta_other - theta_m).
    for (g, gen) in model.generators.iter().enumerate() {
        for seg in 0..SEGMENTS_PER_SHAFT {
            let k = gen.shaft.stiffnesses[seg];
            let (ma, mb) = (Mass::ALL[seg], Mass::ALL[seg + 1]);
            let (ra, rb) = (
                state_map.index(g, ma, VarKind::Speed),
                state_map.index(g, mb, VarKind::Speed),
            );
            let (ca, cb) = (
                state_map.index(g, ma, VarKind::Angle),
                state_map.index(g, mb, VarKind::Angle),
            );
            a[(ra, ca)] -= k * scale[ra];
            a[(ra, cb)] += k * scale[ra];
            a[(rb, cb)] -= k * scale[rb];
            a[(rb, ca)] += k * scale[rb];
        }
    }

    // A12 electrical part: generator-mass speed rows get -A_e over the
    // terminal-angle columns.
    for g in 0..n {
        let row = state_map.index(g, Mass::G, VarKind::Speed);
        for gj in 0..n {
            let col = state_map.index(gj, Mass::G, VarKind::Angle);
            a[(row, col)] -= scale[row] * coupling.a_e[(g, gj)];
        }
    }

    // A21 = I, A22 = 0.
    for i in 0..half {
        a[(half + i, i)] = 1.0;
    }

    // B: load deviations perturb electrical power on generator-mass rows.
    let n_inputs = coupling.b_e.ncols();
    let mut b = DMatrix::zeros(n_states, n_inputs);
    for g in 0..n {
        let row = state_map.index(g, Mass::G, VarKind::Speed);
        for j in 0..n_inputs {
            b[(row, j)] = -scale[row] * coupling.b_e[(g, j)];
        }
    }

    let (c1, c2) = assemble_outputs(&state_map, &output_map);
    let d1 = DMatrix::zeros(n_states, n_inputs);
    let d2 = DMatrix::zeros(c2.nrows(), n_inputs);
    let mut ratio_pairing = Vec::with_capacity(output_map.size());
    for k in 0..output_map.size() {
        let (gen, _seg, kind) = output_map.decode(k);
        ratio_pairing.push((k, state_map.index(gen, Mass::G, kind)));
    }
    let y1_labels = state_map.labels();
    let y2_labels = output_map.labels();
    Ok(StateSpaceSystem {
        a,
        b,
        c1,
        d1,
        c2,
        d2,
        state_map,
        output_map,
        input_bus_ids: coupling.load_bus_ids.clone(),
        ratio_pairing,
        y1_labels,
        y2_labels,
    })
}

/// One oscillatory (or real) mode of the system.
#[derive(Debug, Clone)]
pub struct Mode {
    pub re: f64,
    pub im: f64,
    pub frequency_hz: f64,
    pub damping_ratio: f64,
    /// Top states by right-eigenvector magnitude, (label, normalized weight).
    pub participation: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct ModeSet {
    pub modes: Vec<Mode>,
}

impl ModeSet {
    pub fn lightly_damped(&self, zeta_max: f64) -> Vec<&Mode> {
        self.modes
            .iter()
            .filter(|m| m.damping_ratio < zeta_max && m.frequency_hz > 0.0)
            .collect()
    }
}

/// Eigen-modes of an arbitrary state matrix; conjugate pairs merged to the
/// non-negative-imaginary representative, sorted by frequency.
pub fn eig_modes_of(a: &DMatrix<f64>, state_labels: &[String]) -> Result<ModeSet> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension {
            context: "eigen analysis".into(),
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if state_labels.len() != a.nrows() {
        return Err(Error::Dimension {
            context: "state labels".into(),
            expected: a.nrows(),
            found: state_labels.len(),
        });
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), 1e-14, 100_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".to_string()))?;
    let eigs = schur.complex_eigenvalues();

    let mut modes = Vec::new();
    for lambda in eigs.iter() {
        if lambda.im < 0.0 {
            continue; // conjugate partner of a retained mode
        }
        let norm = (lambda.re * lambda.re + lambda.im * lambda.im).sqrt();
        let damping_ratio = if norm > 0.0 { -lambda.re / norm } else { 0.0 };
        let participation = match linalg::inverse_iteration(a, Complex::new(lambda.re, lambda.im)) {
            Some(v) => {
                let mut weighted: Vec<(usize, f64)> =
                    v.iter().enumerate().map(|(i, c)| (i, c.norm())).collect();
                let max = weighted.iter().map(|(_, w)| *w).fold(0.0, f64::max).max(1e-300);
                weighted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                weighted
                    .into_iter()
                    .take(3)
                    .map(|(i, w)| (state_labels[i].clone(), w / max))
                    .collect()
            }
            None => Vec::new(),
        };
        modes.push(Mode {
            re: lambda.re,
            im: lambda.im,
            frequency_hz: lambda.im / (2.0 * std::f64::consts::PI),
            damping_ratio,
            participation,
        });
    }
    modes.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz).then(a.re.total_cmp(&b.re)));
    Ok(ModeSet { modes })
}

/// Eigen-modes plus, per mode, the largest torsional-output residue
/// magnitude from the given input column: |(C2 v) (u^T b) / (u^T v)| with v
/// and u the right eigenvectors of A and A^T. A residue below threshold
/// means the mode is effectively unobservable from that input.
pub fn eig_modes_with_residues(system: &StateSpaceSystem, input: usize) -> Result<(ModeSet, Vec<f64>)> {
    let modes = system.eig_modes()?;
    let a_t = system.a.transpose();
    let b_col: Vec<Complex<f64>> = system
        .b
        .column(input)
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .collect();
    let mut residues = Vec::with_capacity(modes.modes.len());
    for m in &modes.modes {
        let lambda = Complex::new(m.re, m.im);
        let res = match (
            linalg::inverse_iteration(&system.a, lambda),
            linalg::inverse_iteration(&a_t, lambda.conj()),
        ) {
            (Some(v), Some(u)) => {
                let ub: Complex<f64> = u.iter().zip(b_col.iter()).map(|(a, b)| a * b).sum();
                let uv: Complex<f64> = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                if uv.norm() < 1e-12 {
                    f64::INFINITY // defective pairing; do not excuse the mode
                } else {
                    let gain = ub / uv;
                    (0..system.c2.nrows())
                        .map(|k| {
                            let mut acc = Complex::new(0.0, 0.0);
                            for c in 0..v.len() {
                                let w = system.c2[(k, c)];
                                if w != 0.0 {
                                    acc += v[c] * w;
                                }
                            }
                            (acc * gain).norm()
                        })
                        .fold(0.0, f64::max)
                }
            }
            _ => f64::INFINITY,
        };
        residues.push(res);
    }
    Ok((modes, residues))
}

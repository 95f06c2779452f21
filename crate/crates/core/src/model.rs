//! Domain types shared by every stage of the pipeline: source and channel
//! parameters, source combinations, gain tables and the analysis reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the selection-probability normalization.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// One of the four light sources a user can select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Signal source, Z basis.
    Z,
    /// Weak decoy, X basis.
    X,
    /// Strong decoy, X basis.
    Y,
    /// Vacuum.
    O,
}

impl Source {
    pub fn letter(self) -> char {
        match self {
            Source::Z => 'z',
            Source::X => 'x',
            Source::Y => 'y',
            Source::O => 'o',
        }
    }
}

/// Encoding basis of a pulse triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

/// Decoy-state protocol definition: intensities and per-user selection
/// probabilities, identical for the three users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub mu_z: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    #[serde(default)]
    pub mu_o: f64,
    pub p_z: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_o: f64,
}

impl SourceSpec {
    /// Operating point used in the reference experiment.
    pub const EXPERIMENT: SourceSpec = SourceSpec {
        mu_z: 0.100,
        mu_x: 0.0281,
        mu_y: 0.152,
        mu_o: 0.0,
        p_z: 0.33,
        p_x: 0.51,
        p_y: 0.09,
        p_o: 0.07,
    };

    pub fn new(mu_z: f64, mu_x: f64, mu_y: f64, p_z: f64, p_x: f64, p_y: f64) -> Result<Self> {
        let spec = SourceSpec {
            mu_z,
            mu_x,
            mu_y,
            mu_o: 0.0,
            p_z,
            p_x,
            p_y,
            p_o: 1.0 - p_z - p_x - p_y,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_intensities()?;
        for (name, p) in [("p_z", self.p_z), ("p_x", self.p_x), ("p_y", self.p_y), ("p_o", self.p_o)] {
            if !p.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
            if p < 0.0 {
                return Err(Error::invalid(name, "probability must be >= 0"));
            }
        }
        let sum = self.p_z + self.p_x + self.p_y + self.p_o;
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::invalid(
                "p_o",
                format!("selection probabilities sum to {sum}, expected 1"),
            ));
        }
        Ok(())
    }

    /// Checks the intensities only. Gains do not depend on the selection
    /// probabilities.
    pub fn validate_intensities(&self) -> Result<()> {
        let fields = [
            ("mu_z", self.mu_z),
            ("mu_x", self.mu_x),
            ("mu_y", self.mu_y),
            ("mu_o", self.mu_o),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.mu_z <= 0.0 {
            return Err(Error::invalid("mu_z", "mu_z > 0 violated"));
        }
        if self.mu_x < 0.0 {
            return Err(Error::invalid("mu_x", "0 <= mu_x violated"));
        }
        if self.mu_x >= self.mu_y {
            return Err(Error::invalid("mu_x", "mu_x < mu_y violated"));
        }
        if self.mu_o != 0.0 {
            return Err(Error::invalid("mu_o", "vacuum intensity must be 0"));
        }
        Ok(())
    }

    pub fn intensity(&self, s: Source) -> f64 {
        match s {
            Source::Z => self.mu_z,
            Source::X => self.mu_x,
            Source::Y => self.mu_y,
            Source::O => 0.0,
        }
    }

    pub fn probability(&self, s: Source) -> f64 {
        match s {
            Source::Z => self.p_z,
            Source::X => self.p_x,
            Source::Y => self.p_y,
            Source::O => self.p_o,
        }
    }
}

/// Channel and detection model. Transmittances are end to end and include
/// the detector efficiency and any coincidence-window efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemModel {
    pub eta_a: f64,
    pub eta_b: f64,
    pub eta_c: f64,
    pub p_d: f64,
    pub e_d: f64,
    pub visibility: f64,
    pub f: f64,
}

impl SystemModel {
    /// Ideal GHZ-HOM visibility for weak coherent inputs.
    pub const IDEAL_VISIBILITY: f64 = 0.25;

    pub fn symmetric(eta: f64, p_d: f64, e_d: f64, visibility: f64, f: f64) -> Result<Self> {
        let m = SystemModel {
            eta_a: eta,
            eta_b: eta,
            eta_c: eta,
            p_d,
            e_d,
            visibility,
            f,
        };
        m.validate()?;
        Ok(m)
    }

    /// Per-user transmittance from a total (three-user) loss in dB on top of
    /// a detector efficiency.
    pub fn eta_from_total_loss(total_loss_db: f64, detector_efficiency: f64) -> f64 {
        detector_efficiency * 10f64.powf(-total_loss_db / 30.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_a", self.eta_a),
            ("eta_b", self.eta_b),
            ("eta_c", self.eta_c),
            ("p_d", self.p_d),
            ("e_d", self.e_d),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("{v} not in [0, 1]")));
            }
        }
        if !(0.0..=Self::IDEAL_VISIBILITY).contains(&self.visibility) {
            return Err(Error::invalid(
                "visibility",
                format!("{} not in [0, 0.25]", self.visibility),
            ));
        }
        if !(self.f >= 1.0) || !self.f.is_finite() {
            return Err(Error::invalid("f", format!("{} < 1", self.f)));
        }
        Ok(())
    }

    pub fn etas(&self) -> [f64; 3] {
        [self.eta_a, self.eta_b, self.eta_c]
    }

    /// Geometric mean transmittance, used by the symmetric closed forms.
    pub fn mean_eta(&self) -> f64 {
        (self.eta_a * self.eta_b * self.eta_c).cbrt()
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta_a = eta;
        self.eta_b = eta;
        self.eta_c = eta;
        self
    }
}

/// Temporal/spectral mode description of the three pulses. Times in ps,
/// `gamma` in ps^-2, angular frequency differences in rad/ps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseModel {
    pub gamma: f64,
    pub dt_ab: f64,
    pub dt_ac: f64,
    pub dt_bc: f64,
    pub domega_ab: f64,
    pub domega_bc: f64,
    pub domega_ca: f64,
}

impl Default for PulseModel {
    fn default() -> Self {
        PulseModel::aligned(PulseModel::DEFAULT_GAMMA)
    }
}

impl PulseModel {
    /// Gaussian pulses with a 200 ps intensity FWHM: exp(-2Γt²) = 1/2 at t = 100 ps.
    pub const DEFAULT_GAMMA: f64 = std::f64::consts::LN_2 / 20_000.0;

    pub fn aligned(gamma: f64) -> Self {
        PulseModel {
            gamma,
            dt_ab: 0.0,
            dt_ac: 0.0,
            dt_bc: 0.0,
            domega_ab: 0.0,
            domega_bc: 0.0,
            domega_ca: 0.0,
        }
    }

    /// Delays of Bob and Charlie relative to Alice.
    pub fn with_delays(gamma: f64, dt_b: f64, dt_c: f64) -> Self {
        PulseModel {
            dt_ab: dt_b,
            dt_ac: dt_c,
            dt_bc: dt_c - dt_b,
            ..PulseModel::aligned(gamma)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma", "gamma > 0 violated"));
        }
        let scale = self.dt_ab.abs().max(self.dt_ac.abs()).max(1.0);
        if (self.dt_bc - (self.dt_ac - self.dt_ab)).abs() > 1e-12 * scale {
            return Err(Error::invalid("dt_bc", "dt_bc = dt_ac - dt_ab violated"));
        }
        for (name, v) in [
            ("dt_ab", self.dt_ab),
            ("dt_ac", self.dt_ac),
            ("domega_ab", self.domega_ab),
            ("domega_bc", self.domega_bc),
            ("domega_ca", self.domega_ca),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    fn overlap(&self, dt: f64, domega: f64) -> f64 {
        (-self.gamma * dt * dt / 2.0 - domega * domega / (8.0 * self.gamma)).exp()
    }

    /// Mode-overlap factors of the pairs meeting in paths 1, 2 and 3
    /// (A-B, B-C, C-A).
    pub fn overlaps(&self) -> [f64; 3] {
        [
            self.overlap(self.dt_ab, self.domega_ab),
            self.overlap(self.dt_bc, self.domega_bc),
            self.overlap(self.dt_ac, self.domega_ca),
        ]
    }

    /// Sum of squared pairwise delays.
    pub fn delay_spread(&self) -> f64 {
        self.dt_ab * self.dt_ab + self.dt_ac * self.dt_ac + self.dt_bc * self.dt_bc
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PulseModelRepr {
    #[serde(default = "default_gamma")]
    gamma: f64,
    #[serde(default)]
    dt_ab: f64,
    #[serde(default)]
    dt_ac: f64,
    dt_bc: Option<f64>,
    #[serde(default)]
    domega_ab: f64,
    #[serde(default)]
    domega_bc: f64,
    #[serde(default)]
    domega_ca: f64,
}

fn default_gamma() -> f64 {
    PulseModel::DEFAULT_GAMMA
}

impl<'de> Deserialize<'de> for PulseModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PulseModelRepr::deserialize(d)?;
        Ok(PulseModel {
            gamma: r.gamma,
            dt_ab: r.dt_ab,
            dt_ac: r.dt_ac,
            dt_bc: r.dt_bc.unwrap_or(r.dt_ac - r.dt_ab),
            domega_ab: r.domega_ab,
            domega_bc: r.domega_bc,
            domega_ca: r.domega_ca,
        })
    }
}

/// Numerical settings of the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Failure probability of every individual Chernoff application.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_h_scan_points")]
    pub h_scan_points: usize,
    #[serde(default = "default_quadrature_points")]
    pub quadrature_points: usize,
}

fn default_epsilon() -> f64 {
    1e-10
}
fn default_h_scan_points() -> usize {
    64
}
fn default_quadrature_points() -> usize {
    32
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            epsilon: default_epsilon(),
            h_scan_points: default_h_scan_points(),
            quadrature_points: default_quadrature_points(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid("epsilon", "0 < epsilon < 1 violated"));
        }
        if self.h_scan_points < 2 {
            return Err(Error::invalid("h_scan_points", "h_scan_points >= 2 violated"));
        }
        if self.quadrature_points < 8 {
            return Err(Error::invalid(
                "quadrature_points",
                "quadrature_points >= 8 violated",
            ));
        }
        Ok(())
    }
}

/// Source combinations tracked by the count ledger. The two `*Sym` entries
/// aggregate the three permutations of a vacuum-containing pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Combo {
    Zzz,
    Xxx,
    Yyy,
    Ooo,
    OxxSym,
    XooSym,
    Oyy,
    Yoy,
    Yyo,
    Yoo,
    Oyo,
    Ooy,
}

impl Combo {
    /// Canonical order, also the row order of written ledgers.
    pub const ALL: [Combo; 12] = [
        Combo::Zzz,
        Combo::Xxx,
        Combo::Yyy,
        Combo::Ooo,
        Combo::OxxSym,
        Combo::XooSym,
        Combo::Oyy,
        Combo::Yoy,
        Combo::Yyo,
        Combo::Yoo,
        Combo::Oyo,
        Combo::Ooy,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn token(self) -> &'static str {
        match self {
            Combo::Zzz => "zzz",
            Combo::Xxx => "xxx",
            Combo::Yyy => "yyy",
            Combo::Ooo => "ooo",
            Combo::OxxSym => "oxx_sym",
            Combo::XooSym => "xoo_sym",
            Combo::Oyy => "oyy",
            Combo::Yoy => "yoy",
            Combo::Yyo => "yyo",
            Combo::Yoo => "yoo",
            Combo::Oyo => "oyo",
            Combo::Ooy => "ooy",
        }
    }

    pub fn from_token(s: &str) -> Option<Combo> {
        Combo::ALL.into_iter().find(|c| c.token() == s)
    }

    pub fn basis(self) -> Basis {
        if self == Combo::Zzz {
            Basis::Z
        } else {
            Basis::X
        }
    }

    pub fn is_aggregate(self) -> bool {
        matches!(self, Combo::OxxSym | Combo::XooSym)
    }

    /// The concrete source triples making up this row.
    pub fn members(self) -> Vec<[Source; 3]> {
        use Source::*;
        match self {
            Combo::Zzz => vec![[Z, Z, Z]],
            Combo::Xxx => vec![[X, X, X]],
            Combo::Yyy => vec![[Y, Y, Y]],
            Combo::Ooo => vec![[O, O, O]],
            Combo::OxxSym => vec![[O, X, X], [X, O, X], [X, X, O]],
            Combo::XooSym => vec![[X, O, O], [O, X, O], [O, O, X]],
            Combo::Oyy => vec![[O, Y, Y]],
            Combo::Yoy => vec![[Y, O, Y]],
            Combo::Yyo => vec![[Y, Y, O]],
            Combo::Yoo => vec![[Y, O, O]],
            Combo::Oyo => vec![[O, Y, O]],
            Combo::Ooy => vec![[O, O, Y]],
        }
    }

    pub fn member_count(self) -> usize {
        if self.is_aggregate() {
            3
        } else {
            1
        }
    }
}

impl std::fmt::Display for Combo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// Whether a gain table holds model expectations or observed frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    Expected,
    PlugIn,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GainEntry {
    pub gain: f64,
    pub error_gain: f64,
}

/// Gain and error-weighted gain per source combination. Aggregated rows hold
/// the sum of the member gains. For `zzz` the pairwise (AB, AC, BC) error
/// gains are kept separately; its `error_gain` is the largest of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    pub mode: GainMode,
    entries: [GainEntry; 12],
    pub zzz_pair_error_gains: [f64; 3],
}

impl GainTable {
    pub fn new(mode: GainMode) -> Self {
        GainTable {
            mode,
            entries: [GainEntry::default(); 12],
            zzz_pair_error_gains: [0.0; 3],
        }
    }

    pub fn get(&self, c: Combo) -> GainEntry {
        self.entries[c.index()]
    }

    pub fn gain(&self, c: Combo) -> f64 {
        self.entries[c.index()].gain
    }

    pub fn set(&mut self, c: Combo, entry: GainEntry) {
        self.entries[c.index()] = entry;
    }

    pub fn validate(&self) -> Result<()> {
        for c in Combo::ALL {
            let e = self.get(c);
            let cap = c.member_count() as f64;
            if !(0.0..=cap).contains(&e.gain) || e.error_gain < 0.0 || e.error_gain > e.gain * (1.0 + 1e-12) {
                return Err(Error::invalid(
                    c.token(),
                    format!("0 <= EQ <= Q <= 1 violated (Q={}, EQ={})", e.gain, e.error_gain),
                ));
            }
        }
        Ok(())
    }

    /// Pairwise Z-basis QBERs (AB, AC, BC).
    pub fn qber_z(&self) -> [f64; 3] {
        let q = self.gain(Combo::Zzz);
        if q <= 0.0 {
            return [0.0; 3];
        }
        self.zzz_pair_error_gains.map(|e| e / q)
    }

    pub fn qber_x(&self) -> f64 {
        let e = self.get(Combo::Xxx);
        if e.gain > 0.0 {
            e.error_gain / e.gain
        } else {
            0.0
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("combo,gain,error_gain\n");
        for c in Combo::ALL {
            let e = self.get(c);
            out.push_str(&format!("{},{:e},{:e}\n", c.token(), e.gain, e.error_gain));
        }
        out
    }
}

/// Bounded single-photon quantities from the decoy analysis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DecoyEstimate {
    pub h_low: f64,
    pub h_high: f64,
    pub s_plus_low: f64,
    pub s_minus_high: f64,
    pub y111_exp_low: f64,
    pub e111_exp_high: f64,
    pub y111_real_low: f64,
    pub e111_real_high: f64,
}

/// Final key-rate result together with the intermediates that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub rate_per_pulse: f64,
    pub rate_per_second: Option<f64>,
    pub qber_z_ab: f64,
    pub qber_z_ac: f64,
    pub qber_z_bc: f64,
    pub qber_x: f64,
    pub gain_z: f64,
    pub decoy: DecoyEstimate,
    pub h_argmin: f64,
    pub epsilon: f64,
    /// Number of individual Chernoff applications made by the analysis.
    pub chernoff_applications: usize,
    /// `chernoff_applications * epsilon`.
    pub failure_budget: f64,
    pub h_scan_points: usize,
    /// Set when the rate is zero because no bound survived.
    pub reason: Option<String>,
}

impl KeyRateReport {
    pub fn with_rep_rate(mut self, rep_rate_hz: f64) -> Self {
        self.rate_per_second = Some(self.rate_per_pulse * rep_rate_hz);
        self
    }
}

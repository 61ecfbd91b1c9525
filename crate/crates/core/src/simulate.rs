//! Synthetic ground truth: jig grooves, free bending and obstacle-induced
//! S-shapes, run through the forward measurement model with injected
//! friction attenuation, twist, temperature change and wavelength noise.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::calibrate::{CalibrationDataset, CalibrationSample};
use crate::domain::{CdmConfig, SensorGeometry, WavelengthFrame, ACTIVE_AREAS, FIBERS};
use crate::error::{Error, Result};
use crate::reconstruct::{integrate_curve, CenterlinePolyline, Frame};
use crate::sensing::{forward_wavelengths, AaState, Bend, Deflection};

/// Groove arc length, mm.
pub const DEFAULT_JIG_ARC_MM: f64 = 35.0;
/// Integration step of reference polylines, mm.
pub const REFERENCE_STEP: f64 = 0.01;
/// Default wavelength noise, nm (1 pm).
pub const DEFAULT_NOISE_NM: f64 = 0.001;
/// Interrogator sample period, s.
pub const FRAME_PERIOD_S: f64 = 0.01;
/// Free-bend base curvature per unit of cable displacement, 1/mm.
pub const FREE_BEND_GAIN: f64 = 0.009;
/// Tip-to-base curvature ratio from cable tension loss along the manipulator.
pub const FREE_BEND_TAPER: f64 = 0.85;
/// Default obstacle curvature amplitude, 1/mm.
pub const DEFAULT_OBSTACLE_AMPLITUDE: f64 = 0.015;
/// Proximal reaction lobe relative to the distal lobe.
pub const OBSTACLE_REACTION_RATIO: f64 = 0.5;
/// Half-width of the obstacle sign-change region, mm.
pub const OBSTACLE_HALF_WIDTH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JigSpec {
    /// Signed bend angle, degrees in [−90, 90].
    pub bend_angle: f64,
    pub arc_length: f64,
}

impl JigSpec {
    pub fn new(bend_angle: f64, arc_length: f64) -> Result<Self> {
        if !(bend_angle.is_finite() && bend_angle.abs() <= 90.0) {
            return Err(Error::invariant("bend_angle", format!("{bend_angle}° not in [-90, 90]")));
        }
        if !(arc_length.is_finite() && arc_length > 0.0) {
            return Err(Error::invariant("arc_length", format!("{arc_length} must be positive")));
        }
        Ok(Self { bend_angle, arc_length })
    }

    pub fn with_angle(bend_angle: f64) -> Result<Self> {
        Self::new(bend_angle, DEFAULT_JIG_ARC_MM)
    }

    pub fn sign(&self) -> f64 {
        if self.bend_angle < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Curvature magnitude of a constant-curvature groove.
pub fn jig_curvature(spec: &JigSpec) -> f64 {
    spec.bend_angle.to_radians().abs() / spec.arc_length
}

/// One cubic piece `κ = c₀ + c₁t + c₂t² + c₃t³`, `t = s − start`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    start: f64,
    end: f64,
    c: [f64; 4],
}

impl Piece {
    fn kappa(&self, s: f64) -> f64 {
        let t = s - self.start;
        self.c[0] + t * (self.c[1] + t * (self.c[2] + t * self.c[3]))
    }

    fn turning(&self, s: f64) -> f64 {
        let t = s.clamp(self.start, self.end) - self.start;
        t * (self.c[0] + t * (self.c[1] / 2.0 + t * (self.c[2] / 3.0 + t * self.c[3] / 4.0)))
    }
}

/// Piecewise-cubic ground-truth curvature along the manipulator, measured
/// from the proximal end.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthProfile {
    pieces: Vec<Piece>,
    length: f64,
}

impl TruthProfile {
    pub fn constant(kappa: f64, length: f64) -> Self {
        Self {
            pieces: vec![Piece {
                start: 0.0,
                end: length,
                c: [kappa, 0.0, 0.0, 0.0],
            }],
            length,
        }
    }

    /// `a` on `[0, s0]`, a smoothstep from `a` to `b` on `[s0, s1]`, `b` after.
    pub fn ramp(a: f64, b: f64, s0: f64, s1: f64, length: f64) -> Result<Self> {
        if !(0.0 <= s0 && s0 < s1 && s1 <= length) {
            return Err(Error::Precondition(format!(
                "ramp [{s0}, {s1}] must lie inside [0, {length}]"
            )));
        }
        let w = s1 - s0;
        let d = b - a;
        let mut pieces = Vec::new();
        if s0 > 0.0 {
            pieces.push(Piece {
                start: 0.0,
                end: s0,
                c: [a, 0.0, 0.0, 0.0],
            });
        }
        pieces.push(Piece {
            start: s0,
            end: s1,
            c: [a, 0.0, 3.0 * d / (w * w), -2.0 * d / (w * w * w)],
        });
        if s1 < length {
            pieces.push(Piece {
                start: s1,
                end: length,
                c: [b, 0.0, 0.0, 0.0],
            });
        }
        Ok(Self { pieces, length })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn piece(&self, s: f64) -> &Piece {
        let i = self.pieces.partition_point(|p| p.end < s).min(self.pieces.len() - 1);
        &self.pieces[i]
    }

    pub fn kappa(&self, s: f64) -> f64 {
        self.piece(s.clamp(0.0, self.length)).kappa(s.clamp(0.0, self.length))
    }

    /// `∫₀ˢ κ`.
    pub fn turning(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length);
        self.pieces.iter().filter(|p| p.start < s).map(|p| p.turning(s)).sum()
    }

    pub fn max_abs_kappa(&self) -> f64 {
        let mut m: f64 = 0.0;
        for p in &self.pieces {
            let n = 64;
            for i in 0..=n {
                let s = p.start + (p.end - p.start) * i as f64 / n as f64;
                m = m.max(p.kappa(s).abs());
            }
        }
        m
    }

    /// Sign changes of κ over the interior, located by sampling.
    pub fn sign_changes(&self) -> Vec<f64> {
        let n = 3500;
        let mut out = Vec::new();
        let mut prev = self.kappa(0.0);
        for i in 1..=n {
            let s = self.length * i as f64 / n as f64;
            let k = self.kappa(s);
            if k * prev < 0.0 {
                out.push(s);
            }
            if k != 0.0 {
                prev = k;
            }
        }
        out
    }

    /// Sensor arc measured from the distal tip at manipulator arc `s`:
    /// `∫ₛᴸ (1 − d·κ)`.
    pub fn sensor_arc_from_tip(&self, s: f64, d_offset: f64) -> f64 {
        (self.length - s) - d_offset * (self.turning(self.length) - self.turning(s))
    }

    pub fn polyline(&self, step: f64) -> Result<CenterlinePolyline> {
        integrate_curve(
            |s| self.kappa(s),
            |_| 0.0,
            self.length,
            (0.0, 0.0, 0.0),
            step,
            Frame::CdmProximal,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Jig,
    FreeBend,
    ObstacleProximal,
    ObstacleMiddle,
    ObstacleDistal,
}

impl ScenarioKind {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "jig" => Some(Self::Jig),
            "free-bend" => Some(Self::FreeBend),
            "obstacle-proximal" => Some(Self::ObstacleProximal),
            "obstacle-middle" => Some(Self::ObstacleMiddle),
            "obstacle-distal" => Some(Self::ObstacleDistal),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Jig => "jig",
            Self::FreeBend => "free-bend",
            Self::ObstacleProximal => "obstacle-proximal",
            Self::ObstacleMiddle => "obstacle-middle",
            Self::ObstacleDistal => "obstacle-distal",
        }
    }
}

/// Friction attenuation injected per deflection sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionInjection {
    pub c_pos: [f64; ACTIVE_AREAS],
    pub c_neg: [f64; ACTIVE_AREAS],
}

impl FrictionInjection {
    pub fn none() -> Self {
        Self {
            c_pos: [1.0; ACTIVE_AREAS],
            c_neg: [1.0; ACTIVE_AREAS],
        }
    }

    pub fn coefficient(&self, sign: Deflection, aa: usize) -> f64 {
        match sign {
            Deflection::Positive => self.c_pos[aa],
            Deflection::Negative => self.c_neg[aa],
            Deflection::Straight => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Jig bend angle, degrees.
    pub angle: f64,
    /// Free-bend cable displacement surrogate; its sign is the deflection sign.
    pub displacement: f64,
    /// Obstacle curvature amplitude, 1/mm; the sign orders the two lobes.
    pub amplitude: f64,
    /// Wavelength noise standard deviation, nm.
    pub noise_sigma: f64,
    pub friction: FrictionInjection,
    /// Twist per active area, rad.
    pub twist: [f64; ACTIVE_AREAS],
    /// Temperature change per active area, K.
    pub delta_t: [f64; ACTIVE_AREAS],
    pub frames: usize,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            angle: 90.0,
            displacement: 5.0,
            amplitude: DEFAULT_OBSTACLE_AMPLITUDE,
            noise_sigma: 0.0,
            friction: FrictionInjection::none(),
            twist: [0.0; ACTIVE_AREAS],
            delta_t: [0.0; ACTIVE_AREAS],
            frames: 1,
        }
    }

    pub fn jig(angle: f64) -> Self {
        Self {
            angle,
            ..Self::new(ScenarioKind::Jig)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invariant("noise_sigma", "must be finite and >= 0"));
        }
        if self.frames == 0 {
            return Err(Error::invariant("frames", "must be at least 1"));
        }
        for c in self.friction.c_pos.iter().chain(&self.friction.c_neg) {
            if !(c.is_finite() && *c > 0.0) {
                return Err(Error::invariant("friction", format!("coefficient {c} must be positive")));
            }
        }
        if self.twist.iter().chain(&self.delta_t).any(|v| !v.is_finite()) {
            return Err(Error::invariant("twist/delta_t", "must be finite"));
        }
        if !(self.displacement.is_finite() && self.amplitude.is_finite()) {
            return Err(Error::invariant("displacement/amplitude", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTruth {
    pub profile: TruthProfile,
    /// Reference centerline in the proximal frame at [`REFERENCE_STEP`].
    pub polyline: CenterlinePolyline,
}

/// Ground-truth curvature along the manipulator and its centerline.
pub fn scenario_profile(spec: &ScenarioSpec, cdm: &CdmConfig) -> Result<ScenarioTruth> {
    spec.validate()?;
    let l = cdm.total_arc_length;
    let profile = match spec.kind {
        ScenarioKind::Jig => {
            let jig = JigSpec::new(spec.angle, l)?;
            TruthProfile::constant(jig.sign() * jig_curvature(&jig), l)
        }
        ScenarioKind::FreeBend => {
            let base = FREE_BEND_GAIN * spec.displacement;
            TruthProfile::ramp(base, FREE_BEND_TAPER * base, 0.0, l, l)?
        }
        ScenarioKind::ObstacleProximal | ScenarioKind::ObstacleMiddle | ScenarioKind::ObstacleDistal => {
            let centre = match spec.kind {
                ScenarioKind::ObstacleProximal => 0.3 * l,
                ScenarioKind::ObstacleMiddle => 0.5 * l,
                _ => 0.75 * l,
            };
            let w = OBSTACLE_HALF_WIDTH;
            let a = spec.amplitude;
            TruthProfile::ramp(-OBSTACLE_REACTION_RATIO * a, a, centre - w, centre + w, l)?
        }
    };
    let polyline = profile.polyline(REFERENCE_STEP)?;
    Ok(ScenarioTruth { profile, polyline })
}

/// Truth at the active areas for one manipulator shape.
#[derive(Debug, Clone, PartialEq)]
pub struct AaTruth {
    /// Manipulator arc position of each active area, from the proximal end.
    pub cdm_arc: [f64; ACTIVE_AREAS],
    /// Signed manipulator curvature there.
    pub cdm_kappa: [f64; ACTIVE_AREAS],
    /// Signed sensor-path curvature.
    pub sensor_kappa: [f64; ACTIVE_AREAS],
    pub deflection: Deflection,
}

impl AaTruth {
    /// Sensor-path curvature magnitude and nominal in-plane direction.
    pub fn sensor_bends(&self) -> [Bend; ACTIVE_AREAS] {
        std::array::from_fn(|j| Bend {
            kappa: self.sensor_kappa[j].abs(),
            phi: if self.sensor_kappa[j] < 0.0 { PI } else { 0.0 },
        })
    }
}

/// Majority of the per-area signs, ties broken by their sum.
fn majority_sign(kappa: &[f64; ACTIVE_AREAS]) -> Deflection {
    let pos = kappa.iter().filter(|&&k| k > 0.0).count();
    let neg = kappa.iter().filter(|&&k| k < 0.0).count();
    let sum: f64 = kappa.iter().sum();
    match pos.cmp(&neg) {
        _ if pos == 0 && neg == 0 => Deflection::Straight,
        std::cmp::Ordering::Greater => Deflection::Positive,
        std::cmp::Ordering::Less => Deflection::Negative,
        std::cmp::Ordering::Equal if sum >= 0.0 => Deflection::Positive,
        std::cmp::Ordering::Equal => Deflection::Negative,
    }
}

/// Locates the active areas on the manipulator. The sensor is fixed at the
/// distal tip and runs `d_offset` from the manipulator centerline on the
/// inside of a positive bend.
pub fn aa_truth(profile: &TruthProfile, cdm: &CdmConfig) -> Result<AaTruth> {
    let d = cdm.d_offset;
    let l = profile.length();
    if profile.max_abs_kappa() * d >= 1.0 {
        return Err(Error::Geometry("sensor path curvature is singular".into()));
    }
    let mut cdm_arc = [0.0; ACTIVE_AREAS];
    for (j, &target) in cdm.aa_arc_positions.iter().enumerate() {
        // σ(s) decreases strictly from σ(0) to 0 as s goes 0 → L.
        let (mut lo, mut hi) = (0.0, l);
        if profile.sensor_arc_from_tip(0.0, d) < target {
            return Err(Error::Geometry(format!(
                "active area {} lies beyond the proximal end of the sensor",
                j + 1
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if profile.sensor_arc_from_tip(mid, d) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        cdm_arc[j] = 0.5 * (lo + hi);
    }
    let cdm_kappa: [f64; ACTIVE_AREAS] = std::array::from_fn(|j| profile.kappa(cdm_arc[j]));
    let sensor_kappa = std::array::from_fn(|j| cdm_kappa[j] / (1.0 - d * cdm_kappa[j]));
    Ok(AaTruth {
        cdm_arc,
        cdm_kappa,
        sensor_kappa,
        deflection: majority_sign(&sensor_kappa),
    })
}

/// Seeded Gaussian wavelength noise.
pub struct NoiseSource {
    rng: ChaCha8Rng,
    normal: Option<Normal<f64>>,
}

impl NoiseSource {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        let normal = if sigma > 0.0 {
            Some(Normal::new(0.0, sigma).map_err(|e| Error::invariant("noise_sigma", e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal,
        })
    }

    pub fn apply(&mut self, frame: &mut WavelengthFrame) {
        if let Some(n) = &self.normal {
            for k in 0..FIBERS {
                for j in 0..ACTIVE_AREAS {
                    frame.lambda[k][j] += n.sample(&mut self.rng);
                }
            }
        }
    }
}

/// Noiseless frame for given signed sensor curvatures.
fn frame_for(
    geometry: &SensorGeometry,
    sensor_kappa: &[f64; ACTIVE_AREAS],
    deflection: Deflection,
    spec: &ScenarioSpec,
    k_t: f64,
    timestamp: f64,
) -> Result<WavelengthFrame> {
    let mut states = [AaState::straight(); ACTIVE_AREAS];
    for j in 0..ACTIVE_AREAS {
        let c = spec.friction.coefficient(deflection, j);
        let nominal = if sensor_kappa[j] < 0.0 { PI } else { 0.0 };
        states[j] = AaState::new(sensor_kappa[j].abs() / c, nominal + spec.twist[j], spec.delta_t[j])?;
    }
    forward_wavelengths(geometry, &states, k_t, timestamp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub frames: Vec<WavelengthFrame>,
    pub truth: ScenarioTruth,
    pub aa: AaTruth,
}

/// Frames of a static scenario sampled at the interrogator rate.
pub fn synthesize_frames(
    spec: &ScenarioSpec,
    geometry: &SensorGeometry,
    cdm: &CdmConfig,
    k_t: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    let truth = scenario_profile(spec, cdm)?;
    synthesize_from_truth(truth, spec, geometry, cdm, k_t, seed)
}

/// As [`synthesize_frames`] for an arbitrary ground-truth shape; the
/// profile fields of `spec` are ignored.
pub fn synthesize_from_truth(
    truth: ScenarioTruth,
    spec: &ScenarioSpec,
    geometry: &SensorGeometry,
    cdm: &CdmConfig,
    k_t: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    spec.validate()?;
    let aa = aa_truth(&truth.profile, cdm)?;
    let clean = frame_for(geometry, &aa.sensor_kappa, aa.deflection, spec, k_t, 0.0)?;
    let mut noise = NoiseSource::new(spec.noise_sigma, seed)?;
    let frames = (0..spec.frames)
        .map(|i| {
            let mut f = clean;
            f.timestamp = i as f64 * FRAME_PERIOD_S;
            noise.apply(&mut f);
            f
        })
        .collect();
    Ok(SyntheticDataset { frames, truth, aa })
}

/// Bend angles `from..=to` in `step` degree increments.
pub fn angle_sweep(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as i64;
    (0..=n).map(|i| from + i as f64 * step).collect()
}

/// The bare sensor laid in constant-curvature grooves, optionally rolled
/// about its axis by `roll` (rad) so the bend leaves the nominal plane.
pub fn sensor_groove_dataset(
    geometry: &SensorGeometry,
    angles: &[f64],
    roll: &[f64],
    noise_sigma: f64,
    k_t: f64,
    seed: u64,
) -> Result<CalibrationDataset> {
    let mut noise = NoiseSource::new(noise_sigma, seed)?;
    let mut samples = Vec::new();
    for &r in roll {
        for &angle in angles {
            let jig = JigSpec::with_angle(angle)?;
            let kappa = jig_curvature(&jig);
            let phi = if angle < 0.0 { PI + r } else { r };
            let state = AaState::bending(kappa, phi)?;
            let mut frame = forward_wavelengths(geometry, &[state; ACTIVE_AREAS], k_t, 0.0)?;
            noise.apply(&mut frame);
            let deflection = if angle > 0.0 {
                Deflection::Positive
            } else if angle < 0.0 {
                Deflection::Negative
            } else {
                Deflection::Straight
            };
            samples.push(CalibrationSample {
                frame,
                truth: [Bend {
                    kappa,
                    phi: crate::domain::wrap_angle(phi),
                }; ACTIVE_AREAS],
                deflection,
            });
        }
    }
    CalibrationDataset::new(samples)
}

/// The manipulator, sensor installed, pressed into jig grooves. Truth is
/// the sensor-path curvature at each active area.
#[allow(clippy::too_many_arguments)]
pub fn manipulator_jig_dataset(
    geometry: &SensorGeometry,
    cdm: &CdmConfig,
    angles: &[f64],
    friction: FrictionInjection,
    twist: [f64; ACTIVE_AREAS],
    noise_sigma: f64,
    k_t: f64,
    seed: u64,
) -> Result<CalibrationDataset> {
    let mut noise = NoiseSource::new(noise_sigma, seed)?;
    let mut samples = Vec::new();
    for &angle in angles {
        let spec = ScenarioSpec {
            friction,
            twist,
            ..ScenarioSpec::jig(angle)
        };
        let jig = JigSpec::new(angle, cdm.total_arc_length)?;
        let profile = TruthProfile::constant(jig.sign() * jig_curvature(&jig), cdm.total_arc_length);
        let aa = aa_truth(&profile, cdm)?;
        let mut frame = frame_for(geometry, &aa.sensor_kappa, aa.deflection, &spec, k_t, 0.0)?;
        noise.apply(&mut frame);
        samples.push(CalibrationSample {
            frame,
            truth: aa.sensor_bends(),
            deflection: aa.deflection,
        });
    }
    CalibrationDataset::new(samples)
}

/// Frames of the two-step twist procedure: straight in the bending plane,
/// then a constant-curvature groove. Both are taken at temperature change
/// `delta_t` relative to the stored reference.
pub fn twist_procedure_frames(
    geometry: &SensorGeometry,
    twist: [f64; ACTIVE_AREAS],
    groove_kappa: f64,
    delta_t: f64,
    noise_sigma: f64,
    k_t: f64,
    seed: u64,
) -> Result<(WavelengthFrame, WavelengthFrame)> {
    let mut noise = NoiseSource::new(noise_sigma, seed)?;
    let straight_states = [AaState::new(0.0, 0.0, delta_t)?; ACTIVE_AREAS];
    let mut straight = forward_wavelengths(geometry, &straight_states, k_t, 0.0)?;
    let mut groove_states = [AaState::straight(); ACTIVE_AREAS];
    for j in 0..ACTIVE_AREAS {
        groove_states[j] = AaState::new(groove_kappa, twist[j], delta_t)?;
    }
    let mut groove = forward_wavelengths(geometry, &groove_states, k_t, 1.0)?;
    noise.apply(&mut straight);
    noise.apply(&mut groove);
    Ok((straight, groove))
}

/// Point-wise deviation between a reconstruction and the truth, compared
/// at equal arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterlineError {
    pub mean: f64,
    pub max: f64,
    pub tip: f64,
}

pub fn centerline_error(reconstructed: &CenterlinePolyline, truth: &CenterlinePolyline) -> Result<CenterlineError> {
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for (s, p) in reconstructed.arc.iter().zip(&reconstructed.points) {
        let (q, _) = truth.pose_at(*s)?;
        let d = (p[0] - q[0]).hypot(p[1] - q[1]);
        sum += d;
        max = max.max(d);
    }
    let tip_r = reconstructed.tip();
    let tip_t = truth.tip();
    Ok(CenterlineError {
        mean: sum / reconstructed.points.len() as f64,
        max,
        tip: (tip_r[0] - tip_t[0]).hypot(tip_r[1] - tip_t[1]),
    })
}

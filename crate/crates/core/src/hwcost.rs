//! Hardware scoring of a network: the analytical four-term energy model and a deterministic
//! gate-level synthesis proxy reporting area, power and delay under one of nine strategies.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::qnn::MlpSpec;

/// Shipped cost-model parameters.
pub const DEFAULT_PARAMS_TOML: &str = include_str!("../params/cost_model.toml");

/// 1 µm² expressed in cm².
pub const UM2_TO_CM2: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SynthesisStrategy {
    #[serde(rename = "AREA_0")]
    Area0,
    #[serde(rename = "AREA_1")]
    Area1,
    #[serde(rename = "AREA_2")]
    Area2,
    #[serde(rename = "AREA_3")]
    Area3,
    #[serde(rename = "DELAY_0")]
    Delay0,
    #[serde(rename = "DELAY_1")]
    Delay1,
    #[serde(rename = "DELAY_2")]
    Delay2,
    #[serde(rename = "DELAY_3")]
    Delay3,
    #[serde(rename = "DELAY_4")]
    Delay4,
}

impl SynthesisStrategy {
    pub const ALL: [SynthesisStrategy; 9] = [
        SynthesisStrategy::Area0,
        SynthesisStrategy::Area1,
        SynthesisStrategy::Area2,
        SynthesisStrategy::Area3,
        SynthesisStrategy::Delay0,
        SynthesisStrategy::Delay1,
        SynthesisStrategy::Delay2,
        SynthesisStrategy::Delay3,
        SynthesisStrategy::Delay4,
    ];
    pub const AREA: [SynthesisStrategy; 4] = [
        SynthesisStrategy::Area0,
        SynthesisStrategy::Area1,
        SynthesisStrategy::Area2,
        SynthesisStrategy::Area3,
    ];
    pub const DELAY: [SynthesisStrategy; 5] = [
        SynthesisStrategy::Delay0,
        SynthesisStrategy::Delay1,
        SynthesisStrategy::Delay2,
        SynthesisStrategy::Delay3,
        SynthesisStrategy::Delay4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SynthesisStrategy::Area0 => "AREA_0",
            SynthesisStrategy::Area1 => "AREA_1",
            SynthesisStrategy::Area2 => "AREA_2",
            SynthesisStrategy::Area3 => "AREA_3",
            SynthesisStrategy::Delay0 => "DELAY_0",
            SynthesisStrategy::Delay1 => "DELAY_1",
            SynthesisStrategy::Delay2 => "DELAY_2",
            SynthesisStrategy::Delay3 => "DELAY_3",
            SynthesisStrategy::Delay4 => "DELAY_4",
        }
    }

    pub fn is_area(self) -> bool {
        Self::AREA.contains(&self)
    }
}

impl fmt::Display for SynthesisStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthesisStrategy {
    type Err = Error;

    /// Accepts `AREA_3`, `AREA 3`, `area3` and similar spellings.
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | ' ' | '-'))
            .map(|c| c.to_ascii_uppercase())
            .collect();
        Self::ALL
            .iter()
            .copied()
            .find(|st| st.name().replace('_', "") == norm)
            .ok_or_else(|| config(format!("unknown synthesis strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParams {
    pub full_adder_area_um2: f64,
    /// Power of one full-adder cell at 100% activity.
    pub full_adder_power_w: f64,
    pub full_adder_delay_ps: f64,
    /// Per-bit register area.
    pub register_area_um2: f64,
    /// Per-bit register power at 100% activity.
    pub register_power_w: f64,
    /// Launch-plus-capture overhead added once to the combinational path.
    pub register_delay_ps: f64,
    pub wiring_overhead: f64,
    pub activity_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    pub input_read_j_per_bit: f64,
    pub param_read_j_per_bit: f64,
    /// Per multiply-accumulate, per unit of `weight_bits * input_bits`.
    pub mac_j_per_bit2: f64,
    pub output_write_j_per_bit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyMultipliers {
    pub area_mult: f64,
    pub power_mult: f64,
    pub delay_mult: f64,
}

impl StrategyMultipliers {
    pub const UNIT: StrategyMultipliers =
        StrategyMultipliers { area_mult: 1.0, power_mult: 1.0, delay_mult: 1.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModelParams {
    pub version: u32,
    pub cells: CellParams,
    pub energy: EnergyParams,
    pub strategies: BTreeMap<SynthesisStrategy, StrategyMultipliers>,
}

impl Default for CostModelParams {
    fn default() -> Self {
        Self::from_toml(DEFAULT_PARAMS_TOML).expect("shipped cost model parses")
    }
}

impl CostModelParams {
    pub fn from_toml(text: &str) -> Result<Self> {
        let params: CostModelParams = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config(e.to_string()))
    }

    /// Every constant set to 1 and every strategy neutral.
    pub fn unit() -> Self {
        CostModelParams {
            version: 1,
            cells: CellParams {
                full_adder_area_um2: 1.0,
                full_adder_power_w: 1.0,
                full_adder_delay_ps: 1.0,
                register_area_um2: 1.0,
                register_power_w: 1.0,
                register_delay_ps: 1.0,
                wiring_overhead: 1.0,
                activity_factor: 1.0,
            },
            energy: EnergyParams {
                input_read_j_per_bit: 1.0,
                param_read_j_per_bit: 1.0,
                mac_j_per_bit2: 1.0,
                output_write_j_per_bit: 1.0,
            },
            strategies: SynthesisStrategy::ALL
                .iter()
                .map(|&s| (s, StrategyMultipliers::UNIT))
                .collect(),
        }
    }

    pub fn multipliers(&self, strategy: SynthesisStrategy) -> StrategyMultipliers {
        self.strategies.get(&strategy).copied().unwrap_or(StrategyMultipliers::UNIT)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.cells;
        let e = &self.energy;
        let constants = [
            ("full_adder_area_um2", c.full_adder_area_um2),
            ("full_adder_power_w", c.full_adder_power_w),
            ("full_adder_delay_ps", c.full_adder_delay_ps),
            ("register_area_um2", c.register_area_um2),
            ("register_power_w", c.register_power_w),
            ("register_delay_ps", c.register_delay_ps),
            ("wiring_overhead", c.wiring_overhead),
            ("activity_factor", c.activity_factor),
            ("input_read_j_per_bit", e.input_read_j_per_bit),
            ("param_read_j_per_bit", e.param_read_j_per_bit),
            ("mac_j_per_bit2", e.mac_j_per_bit2),
            ("output_write_j_per_bit", e.output_write_j_per_bit),
        ];
        for (name, v) in constants {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config(format!("cost constant {name} must be positive, got {v}")));
            }
        }
        for s in SynthesisStrategy::ALL {
            let m = self
                .strategies
                .get(&s)
                .ok_or_else(|| config(format!("missing multipliers for strategy {s}")))?;
            for v in [m.area_mult, m.power_mult, m.delay_mult] {
                if !(0.3..=3.0).contains(&v) {
                    return Err(config(format!("strategy {s} multiplier {v} outside [0.3, 3.0]")));
                }
            }
        }
        let area: Vec<_> = SynthesisStrategy::AREA.iter().map(|&s| self.multipliers(s)).collect();
        if !area.windows(2).all(|w| w[1].area_mult < w[0].area_mult && w[1].delay_mult >= w[0].delay_mult) {
            return Err(config(
                "AREA strategies need strictly decreasing area and nondecreasing delay multipliers",
            ));
        }
        let delay: Vec<_> = SynthesisStrategy::DELAY.iter().map(|&s| self.multipliers(s)).collect();
        if !delay.windows(2).all(|w| w[1].delay_mult < w[0].delay_mult && w[1].area_mult >= w[0].area_mult) {
            return Err(config(
                "DELAY strategies need strictly decreasing delay and nondecreasing area multipliers",
            ));
        }
        Ok(())
    }
}

/// One fully connected layer as seen by the cost models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub input_bits: u32,
    pub weight_bits: u32,
    pub output_bits: u32,
}

impl LayerShape {
    pub fn macs(&self) -> u64 {
        (self.inputs * self.outputs) as u64
    }
}

pub fn layer_shapes(spec: &MlpSpec) -> Vec<LayerShape> {
    spec.layer_dims()
        .into_iter()
        .enumerate()
        .map(|(i, (inputs, outputs))| LayerShape {
            inputs,
            outputs,
            input_bits: spec.input_bits(i),
            weight_bits: spec.weight_bits[i],
            output_bits: spec.activation_bits(i),
        })
        .collect()
}

/// Energy per inference from input reads, parameter reads, MACs and output writes, summed over layers.
pub fn layers_energy(layers: &[LayerShape], e: &EnergyParams) -> f64 {
    layers
        .iter()
        .map(|l| {
            let input = e.input_read_j_per_bit * (l.inputs as f64) * f64::from(l.input_bits);
            let param = e.param_read_j_per_bit * l.macs() as f64 * f64::from(l.weight_bits);
            let mac = e.mac_j_per_bit2
                * l.macs() as f64
                * f64::from(l.weight_bits)
                * f64::from(l.input_bits);
            let output = e.output_write_j_per_bit * (l.outputs as f64) * f64::from(l.output_bits);
            input + param + mac + output
        })
        .sum()
}

/// Analytical energy estimate, joules per inference.
pub fn analytical_energy(spec: &MlpSpec, params: &CostModelParams) -> f64 {
    layers_energy(&layer_shapes(spec), &params.energy)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    /// Ripple adders keyed by width in bits.
    pub adders: BTreeMap<u32, u64>,
    /// Array multipliers keyed `"<weight bits>x<input bits>"`.
    pub multipliers: BTreeMap<String, u64>,
    /// Registers keyed by width in bits.
    pub registers: BTreeMap<u32, u64>,
    pub full_adder_cells: u64,
    pub register_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareReport {
    pub strategy: SynthesisStrategy,
    pub area_um2: f64,
    pub power_w: f64,
    pub delay_ps: f64,
    pub energy_per_inference_j: f64,
    pub gate_counts: GateCounts,
}

fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Structural estimate for a layer list. Products are `b_w x b_a` array multipliers of `b_w * b_a`
/// full-adder cells; each product and the bias are accumulated by ripple adders of width
/// `b_w + b_a + ceil(log2 fan_in)`; the network input and every layer output are registered.
/// The whole network is one combinational path.
pub fn synthesize_layers(
    layers: &[LayerShape],
    strategy: SynthesisStrategy,
    params: &CostModelParams,
) -> HardwareReport {
    let mut gates = GateCounts::default();
    let mut path_stages = 0u64;
    if let Some(first) = layers.first() {
        *gates.registers.entry(first.input_bits).or_default() += first.inputs as u64;
    }
    for l in layers {
        let macs = l.macs();
        let (bw, ba) = (l.weight_bits, l.input_bits);
        let acc_width = bw + ba + ceil_log2(l.inputs);
        *gates.multipliers.entry(format!("{bw}x{ba}")).or_default() += macs;
        *gates.adders.entry(acc_width).or_default() += macs;
        *gates.registers.entry(l.output_bits).or_default() += l.outputs as u64;
        gates.full_adder_cells += macs * u64::from(bw * ba) + macs * u64::from(acc_width);
        if macs > 0 {
            let tree_levels = ceil_log2(l.inputs + 1);
            path_stages += u64::from(bw + ba + acc_width + tree_levels);
        }
    }
    gates.register_bits = gates.registers.iter().map(|(&w, &n)| u64::from(w) * n).sum();

    let c = &params.cells;
    let m = params.multipliers(strategy);
    let fa = gates.full_adder_cells as f64;
    let regs = gates.register_bits as f64;
    let area_um2 =
        (fa * c.full_adder_area_um2 + regs * c.register_area_um2) * c.wiring_overhead * m.area_mult;
    let power_w =
        c.activity_factor * (fa * c.full_adder_power_w + regs * c.register_power_w) * m.power_mult;
    let delay_ps = if layers.is_empty() {
        0.0
    } else {
        (path_stages as f64 * c.full_adder_delay_ps + c.register_delay_ps) * m.delay_mult
    };
    HardwareReport {
        strategy,
        area_um2,
        power_w,
        delay_ps,
        energy_per_inference_j: power_w * delay_ps * 1e-12,
        gate_counts: gates,
    }
}

pub fn synthesize_proxy(
    spec: &MlpSpec,
    strategy: SynthesisStrategy,
    params: &CostModelParams,
) -> HardwareReport {
    synthesize_layers(&layer_shapes(spec), strategy, params)
}

/// Power density in W/cm².
pub fn power_density(report: &HardwareReport) -> Result<f64> {
    power_density_of(report.power_w, report.area_um2)
}

pub fn power_density_of(power_w: f64, area_um2: f64) -> Result<f64> {
    if !(area_um2 > 0.0) {
        return Err(domain(format!("power density needs positive area, got {area_um2}")));
    }
    Ok(power_w / (area_um2 * UM2_TO_CM2))
}

/// Upper bounds for an in-pixel implementable design. All bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintLimits {
    pub max_area_um2: f64,
    pub max_power_density_w_per_cm2: f64,
    pub max_delay_ps: f64,
    pub max_val_mse: f64,
}

impl ConstraintLimits {
    pub const PIXEL_AREA_UM2: f64 = 250.0 * 250.0;
    pub const PIXEL_POWER_DENSITY_W_PER_CM2: f64 = 5.0;
    pub const PIXEL_DELAY_PS: f64 = 20.0;

    /// In-pixel limits with the MSE bound set to the dataset's mean-predictor baseline.
    pub fn in_pixel(baseline_mse: f64) -> Self {
        ConstraintLimits {
            max_area_um2: Self::PIXEL_AREA_UM2,
            max_power_density_w_per_cm2: Self::PIXEL_POWER_DENSITY_W_PER_CM2,
            max_delay_ps: Self::PIXEL_DELAY_PS,
            max_val_mse: baseline_mse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub area: bool,
    pub power_density: bool,
    pub delay: bool,
    pub val_mse: bool,
}

impl ConstraintCheck {
    pub fn all(&self) -> bool {
        self.area && self.power_density && self.delay && self.val_mse
    }
}

pub fn check_constraints(report: &HardwareReport, val_mse: f64, limits: &ConstraintLimits) -> ConstraintCheck {
    let density = power_density(report).unwrap_or(f64::INFINITY);
    ConstraintCheck {
        area: report.area_um2 <= limits.max_area_um2,
        power_density: density <= limits.max_power_density_w_per_cm2,
        delay: report.delay_ps <= limits.max_delay_ps,
        val_mse: val_mse <= limits.max_val_mse,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(widths: &[usize], bits: &[u32], io: u32) -> MlpSpec {
        MlpSpec {
            input_width: 9,
            hidden_layer_widths: widths.to_vec(),
            weight_bits: bits.to_vec(),
            io_bits: io,
        }
    }

    fn report(area_um2: f64, power_w: f64, delay_ps: f64) -> HardwareReport {
        HardwareReport {
            strategy: SynthesisStrategy::Area0,
            area_um2,
            power_w,
            delay_ps,
            energy_per_inference_j: power_w * delay_ps * 1e-12,
            gate_counts: GateCounts::default(),
        }
    }

    #[test]
    fn shipped_params_are_valid_and_round_trip() {
        let p = CostModelParams::default();
        assert_eq!(p.strategies.len(), 9);
        let again = CostModelParams::from_toml(&p.to_toml().unwrap()).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn params_reject_unknown_keys_and_bad_orderings() {
        let extra = DEFAULT_PARAMS_TOML.replace("[cells]", "[cells]\nbogus = 1.0");
        assert!(CostModelParams::from_toml(&extra).is_err());
        let mut p = CostModelParams::default();
        p.strategies.get_mut(&SynthesisStrategy::Area3).unwrap().area_mult = 0.9;
        assert!(p.validate().is_err());
        let mut p = CostModelParams::default();
        p.strategies.get_mut(&SynthesisStrategy::Delay4).unwrap().delay_mult = 0.2;
        assert!(p.validate().is_err());
        let mut p = CostModelParams::default();
        p.cells.wiring_overhead = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn strategy_names_parse() {
        assert_eq!("AREA_3".parse::<SynthesisStrategy>().unwrap(), SynthesisStrategy::Area3);
        assert_eq!("area 3".parse::<SynthesisStrategy>().unwrap(), SynthesisStrategy::Area3);
        assert_eq!("delay2".parse::<SynthesisStrategy>().unwrap(), SynthesisStrategy::Delay2);
        assert!("AREA_9".parse::<SynthesisStrategy>().is_err());
        for s in SynthesisStrategy::ALL {
            assert_eq!(s.to_string().parse::<SynthesisStrategy>().unwrap(), s);
        }
    }

    #[test]
    fn energy_unit_examples() {
        let unit = CostModelParams::unit();
        assert_eq!(layers_energy(&[], &unit.energy), 0.0);
        let one = LayerShape { inputs: 1, outputs: 1, input_bits: 1, weight_bits: 1, output_bits: 1 };
        assert_eq!(layers_energy(&[one], &unit.energy), 4.0);
    }

    #[test]
    fn energy_hand_sum_default_constants() {
        // 9 -> 8 -> 1, 8 bits everywhere.
        let s = spec(&[8], &[8, 8], 8);
        let p = CostModelParams::default();
        let e = p.energy;
        let l0 = e.input_read_j_per_bit * 9.0 * 8.0
            + e.param_read_j_per_bit * 72.0 * 8.0
            + e.mac_j_per_bit2 * 72.0 * 64.0
            + e.output_write_j_per_bit * 8.0 * 8.0;
        let l1 = e.input_read_j_per_bit * 8.0 * 8.0
            + e.param_read_j_per_bit * 8.0 * 8.0
            + e.mac_j_per_bit2 * 8.0 * 64.0
            + e.output_write_j_per_bit * 8.0;
        // 720 + 8640 + 13824 + 640 (layer 0) + 640 + 960 + 1536 + 80 (layer 1), in fJ.
        let spreadsheet = 27.04e-12;
        assert!((l0 + l1 - spreadsheet).abs() < 1e-24);
        assert!((analytical_energy(&s, &p) - spreadsheet).abs() < 1e-24);
    }

    #[test]
    fn gate_counts_by_hand() {
        // 9 -> 4 -> 1 at 4 bits.
        // Layer 0: 36 multipliers 4x4, 36 adders of 4+4+ceil(log2 9)=12 bits.
        // Layer 1: 4 multipliers 4x4, 4 adders of 4+4+2=10 bits.
        // Registers: 9 input + 4 hidden + 1 output, all 4 bits.
        let s = spec(&[4], &[4, 4], 4);
        let r = synthesize_proxy(&s, SynthesisStrategy::Area0, &CostModelParams::unit());
        let g = &r.gate_counts;
        assert_eq!(g.multipliers, BTreeMap::from([("4x4".to_string(), 40)]));
        assert_eq!(g.adders, BTreeMap::from([(12, 36), (10, 4)]));
        assert_eq!(g.registers, BTreeMap::from([(4, 14)]));
        let fa = 40 * 16 + 36 * 12 + 4 * 10;
        assert_eq!(g.full_adder_cells, fa);
        assert_eq!(g.register_bits, 56);
        assert_eq!(r.area_um2, (fa + 56) as f64);
        assert_eq!(r.power_w, (fa + 56) as f64);
        // Path: (4+4+12+ceil(log2 10)=4) + (4+4+10+ceil(log2 5)=3) stages plus one register overhead.
        assert_eq!(r.delay_ps, 24.0 + 21.0 + 1.0);
        assert_eq!(r.energy_per_inference_j, r.power_w * r.delay_ps * 1e-12);
        let density = power_density(&r).unwrap();
        assert_eq!(density, 1.0 / UM2_TO_CM2);
    }

    #[test]
    fn doubling_widths_at_least_doubles_area() {
        let p = CostModelParams::default();
        for (a, b) in [(vec![4], vec![8]), (vec![3, 5], vec![6, 10]), (vec![2, 4, 8], vec![4, 8, 16])] {
            let bits = vec![6; a.len() + 1];
            let small = synthesize_proxy(&spec(&a, &bits, 6), SynthesisStrategy::Area0, &p);
            let big = synthesize_proxy(&spec(&b, &bits, 6), SynthesisStrategy::Area0, &p);
            let fa_ratio = big.gate_counts.full_adder_cells as f64 / small.gate_counts.full_adder_cells as f64;
            assert!(fa_ratio >= 2.0, "{a:?}: {fa_ratio}");
            assert!(big.area_um2 >= 1.9 * small.area_um2);
        }
    }

    #[test]
    fn strategies_trade_area_for_delay() {
        let p = CostModelParams::default();
        let s = spec(&[6, 5], &[5, 7, 6], 6);
        let r0 = synthesize_proxy(&s, SynthesisStrategy::Area0, &p);
        let r3 = synthesize_proxy(&s, SynthesisStrategy::Area3, &p);
        assert!(r3.area_um2 < r0.area_um2);
        assert!(r3.delay_ps >= r0.delay_ps);
        let area: Vec<f64> = SynthesisStrategy::AREA.iter().map(|&st| synthesize_proxy(&s, st, &p).area_um2).collect();
        assert!(area.windows(2).all(|w| w[1] <= w[0]));
        let delay: Vec<f64> = SynthesisStrategy::DELAY.iter().map(|&st| synthesize_proxy(&s, st, &p).delay_ps).collect();
        assert!(delay.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn power_density_examples() {
        assert!((power_density(&report(1e4, 1e-6, 1.0)).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(power_density(&report(1e4, 5e-4, 1.0)).unwrap(), 5.0);
        assert!(power_density(&report(0.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn constraint_boundaries_are_inclusive() {
        let limits = ConstraintLimits::in_pixel(0.044837);
        let at_limit = report(62_500.0, 5.0 * 62_500.0 * UM2_TO_CM2, 20.0);
        assert!(check_constraints(&at_limit, 0.044837, &limits).all());
        let wide = report(62_501.0, 1e-6, 10.0);
        let c = check_constraints(&wide, 0.01, &limits);
        assert!(!c.area && c.power_density && c.delay && c.val_mse && !c.all());
        let c = check_constraints(&report(1e3, 1e-7, 10.0), 0.05, &limits);
        assert!(!c.val_mse && c.area && !c.all());
        let c = check_constraints(&report(1e3, 1e-7, 20.5), 0.01, &limits);
        assert!(!c.delay);
    }
}

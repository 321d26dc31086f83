use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    SemigroupChecks,
    KernelBounds,
    MetricVolumes,
    BesovEquivalence,
    BesovLimits,
    PerimeterCoarea,
    IsoperimetricScan,
    SobolevHls,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::SemigroupChecks,
        ExperimentId::KernelBounds,
        ExperimentId::MetricVolumes,
        ExperimentId::BesovEquivalence,
        ExperimentId::BesovLimits,
        ExperimentId::PerimeterCoarea,
        ExperimentId::IsoperimetricScan,
        ExperimentId::SobolevHls,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ExperimentId::SemigroupChecks => "semigroup-checks",
            ExperimentId::KernelBounds => "kernel-bounds",
            ExperimentId::MetricVolumes => "metric-volumes",
            ExperimentId::BesovEquivalence => "besov-equivalence",
            ExperimentId::BesovLimits => "besov-limits",
            ExperimentId::PerimeterCoarea => "perimeter-coarea",
            ExperimentId::IsoperimetricScan => "isoperimetric-scan",
            ExperimentId::SobolevHls => "sobolev-hls",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentId::SemigroupChecks => "semigroup algebra, stochastic completeness, fractional powers, subordination",
            ExperimentId::KernelBounds => "Gaussian kernel sandwich and ultracontractivity exponents",
            ExperimentId::MetricVolumes => "CC distances, ball volumes, volume scaling and doubling",
            ExperimentId::BesovEquivalence => "heat vs difference seminorm bands and the min-max inequality",
            ExperimentId::BesovLimits => "beta -> 0 and beta -> 1 limits of the heat seminorm",
            ExperimentId::PerimeterCoarea => "perimeter identity, mollification, coarea and the small-s limit",
            ExperimentId::IsoperimetricScan => "isoperimetric ratios for three perimeters over a set family",
            ExperimentId::SobolevHls => "pointwise potential bound, HLS and Sobolev ratios",
        }
    }

    /// The statements each experiment exercises.
    pub fn claims(self) -> &'static str {
        match self {
            ExperimentId::SemigroupChecks => {
                "heat semigroup properties, Balakrishnan formula, Riesz inversion, Poisson subordination, Ledoux estimate"
            }
            ExperimentId::KernelBounds => "two-sided Gaussian heat kernel bounds, ultracontractivity",
            ExperimentId::MetricVolumes => "ball-volume model, homogeneous volume growth, doubling",
            ExperimentId::BesovEquivalence => "heat/difference Besov equivalence, fractional-semigroup equivalence, min-max lemma",
            ExperimentId::BesovLimits => "Maz'ya-Shaposhnikova limit, Bourgain-Brezis-Mironescu bracket",
            ExperimentId::PerimeterCoarea => "perimeter identity, perimeter ordering, coarea formula, small-s perimeter limit",
            ExperimentId::IsoperimetricScan => "fractional isoperimetric inequality, Sobolev route via coarea",
            ExperimentId::SobolevHls => "maximal bound for potentials, Hardy-Littlewood-Sobolev, fractional Sobolev embedding",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// The `list` table: id and description, then the claims on the next line.
pub fn listing() -> String {
    let w = ExperimentId::ALL.iter().map(|e| e.id().len()).max().unwrap_or(0);
    let mut out = String::new();
    for e in ExperimentId::ALL {
        out.push_str(&format!("{:<w$}  {}\n{:<w$}  -> {}\n", e.id(), e.description(), "", e.claims()));
    }
    out
}

//! Green Complexity Index and Green Complexity Potential.

use serde::{Deserialize, Serialize};

use crate::bipartite::BinaryBipartite;
use crate::complexity::{ScoreAxis, ScoreVector};
use crate::error::{Error, Result};
use crate::ingest::ActivityMask;
use crate::numeric::descending_ranks;
use crate::relatedness::{relatedness_density, ProximityNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PciTransform {
    /// PCI values as given; standardised PCI can be negative.
    #[default]
    Raw,
    /// `(n + 1 - rank) / n`: the most complex activity maps to 1, all values positive.
    Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GcpWeighting {
    #[default]
    Unweighted,
    /// Weights each missing green activity by its rank-transformed PCI.
    PciRank,
}

/// PCI aligned with the matrix columns, optionally rank-transformed.
fn aligned_pci(m: &BinaryBipartite, pci: &ScoreVector, transform: PciTransform) -> Result<Vec<f64>> {
    if pci.axis != ScoreAxis::Activity {
        return Err(Error::Data("PCI must be an activity score vector".into()));
    }
    let lookup = pci.lookup();
    let raw: Vec<f64> = m
        .activities
        .iter()
        .map(|a| {
            lookup
                .get(a.to_string().as_str())
                .copied()
                .ok_or_else(|| Error::Data(format!("no PCI for activity {a}")))
        })
        .collect::<Result<_>>()?;
    Ok(match transform {
        PciTransform::Raw => raw,
        PciTransform::Rank => {
            let n = raw.len() as f64;
            descending_ranks(&raw)
                .into_iter()
                .map(|r| (n + 1.0 - r as f64) / n)
                .collect()
        }
    })
}

/// `GCI(g) = sum of PCI(a)` over green activities `g` is specialised in.
pub fn gci(m: &BinaryBipartite, pci: &ScoreVector, green: &ActivityMask, transform: PciTransform) -> Result<Vec<f64>> {
    green.check_against(&m.activities)?;
    let values = aligned_pci(m, pci, transform)?;
    Ok(m.row_lists()
        .iter()
        .map(|row| row.iter().filter(|&&a| green.flags[a]).map(|&a| values[a]).sum())
        .collect())
}

/// Mean relatedness density of each geo to the green activities it is not yet
/// specialised in. `None` when there is no such activity with a defined density.
pub fn gcp(
    net: &ProximityNetwork,
    m: &BinaryBipartite,
    green: &ActivityMask,
    weighting: GcpWeighting,
    pci: Option<&ScoreVector>,
) -> Result<Vec<Option<f64>>> {
    green.check_against(&m.activities)?;
    let density = relatedness_density(net, m)?;
    let weights = match weighting {
        GcpWeighting::Unweighted => vec![1.0; m.n_activities()],
        GcpWeighting::PciRank => {
            let pci = pci.ok_or_else(|| Error::Config("PCI-weighted GCP needs a PCI vector".into()))?;
            aligned_pci(m, pci, PciTransform::Rank)?
        }
    };
    Ok((0..m.n_geos())
        .map(|g| {
            let (num, den) = green
                .selected()
                .filter(|&a| !m.get(g, a) && !density[[g, a]].is_nan())
                .fold((0.0, 0.0), |(n, d), a| (n + weights[a] * density[[g, a]], d + weights[a]));
            (den > 0.0).then(|| num / den)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenScores {
    pub geos: Vec<String>,
    pub gci: Vec<f64>,
    pub gcp: Vec<Option<f64>>,
    pub green_specializations: Vec<usize>,
    pub green_set: String,
    pub green_activities: usize,
    pub pci_transform: PciTransform,
    pub gcp_weighting: GcpWeighting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GreenOptions {
    pub pci_transform: PciTransform,
    pub gcp_weighting: GcpWeighting,
}

pub fn green_scores(
    m: &BinaryBipartite,
    pci: &ScoreVector,
    net: &ProximityNetwork,
    green: &ActivityMask,
    opts: &GreenOptions,
) -> Result<GreenScores> {
    let gci = gci(m, pci, green, opts.pci_transform)?;
    let gcp = gcp(net, m, green, opts.gcp_weighting, Some(pci))?;
    let green_specializations = m
        .row_lists()
        .iter()
        .map(|row| row.iter().filter(|&&a| green.flags[a]).count())
        .collect();
    Ok(GreenScores {
        geos: m.geos.clone(),
        gci,
        gcp,
        green_specializations,
        green_set: green.name.clone(),
        green_activities: green.count(),
        pci_transform: opts.pci_transform,
        gcp_weighting: opts.gcp_weighting,
    })
}

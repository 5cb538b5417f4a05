//! Principal-component view of feature maps: pixels are samples, channels
//! are variables. The top four components are min-max scaled to [0, 1].

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::tensor::Tensor4;

pub const PCA_COMPONENTS: usize = 4;

/// Full decomposition of one `(1, C, h, w)` feature tensor.
#[derive(Debug, Clone)]
pub struct PcaDecomposition {
    pub height: usize,
    pub width: usize,
    /// Per-channel mean.
    pub mean: Vec<f64>,
    /// Unit loading vectors, strongest first; each is flipped so its
    /// largest-magnitude entry is positive.
    pub loadings: Vec<Vec<f64>>,
    /// Projection of the centred pixels on each loading vector.
    pub scores: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    /// Components whose singular value clears the numerical-rank tolerance.
    pub rank: usize,
}

impl PcaDecomposition {
    /// Population variance of each score series.
    pub fn variances(&self) -> Vec<f64> {
        self.scores
            .iter()
            .map(|s| s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64)
            .collect()
    }
}

pub fn pca_decompose(features: &Tensor4) -> Result<PcaDecomposition> {
    let [n, c, h, w] = features.shape();
    if n != 1 {
        return Err(Error::invalid(format!("PCA expects one sample, got batch {n}")));
    }
    let pixels = h * w;
    if pixels == 0 || c == 0 {
        return Err(Error::invalid("PCA of an empty feature map"));
    }
    let data = features.data();
    let mean: Vec<f64> = (0..c)
        .map(|ch| data[ch * pixels..(ch + 1) * pixels].iter().sum::<f64>() / pixels as f64)
        .collect();
    let centred = DMatrix::from_fn(pixels, c, |p, ch| data[ch * pixels + p] - mean[ch]);
    let svd = centred.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));

    let top = sv.iter().copied().fold(0.0, f64::max);
    let tol = top * pixels.max(c) as f64 * f64::EPSILON;
    let mut loadings = Vec::with_capacity(order.len());
    let mut scores = Vec::with_capacity(order.len());
    let mut singular_values = Vec::with_capacity(order.len());
    for &i in &order {
        let mut v: Vec<f64> = v_t.row(i).iter().copied().collect();
        let lead = v
            .iter()
            .enumerate()
            .fold(0, |best, (j, x)| if x.abs() > v[best].abs() { j } else { best });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let s: Vec<f64> = (0..pixels)
            .map(|p| (0..c).map(|ch| centred[(p, ch)] * v[ch]).sum())
            .collect();
        loadings.push(v);
        scores.push(s);
        singular_values.push(sv[i]);
    }
    let rank = if top > 0.0 {
        singular_values.iter().filter(|&&s| s > tol).count()
    } else {
        0
    };
    Ok(PcaDecomposition {
        height: h,
        width: w,
        mean,
        loadings,
        scores,
        singular_values,
        rank,
    })
}

/// Rebuilds the feature tensor from every component.
pub fn reconstruct(d: &PcaDecomposition) -> Tensor4 {
    let c = d.mean.len();
    let pixels = d.height * d.width;
    let mut out = vec![0.0; c * pixels];
    for ch in 0..c {
        for p in 0..pixels {
            let mut v = d.mean[ch];
            for (l, s) in d.loadings.iter().zip(&d.scores) {
                v += s[p] * l[ch];
            }
            out[ch * pixels + p] = v;
        }
    }
    Tensor4::from_vec([1, c, d.height, d.width], out).expect("sizes agree")
}

#[derive(Debug, Clone)]
pub struct PcaFeatures {
    /// Four bands in [0, 1]; missing components are constant 0.5.
    pub raster: Raster,
    /// Variances of the unscaled projections, strongest first; 0 for
    /// components past the numerical rank, matching their constant bands.
    pub variances: Vec<f64>,
    pub rank: usize,
}

/// Top four principal components of a `(1, C, h, w)` feature map, each
/// min-max scaled to [0, 1].
pub fn pca_features(features: &Tensor4) -> Result<PcaFeatures> {
    if features.channels() < PCA_COMPONENTS {
        return Err(Error::invalid(format!(
            "PCA view needs at least {PCA_COMPONENTS} channels, got {}",
            features.channels()
        )));
    }
    let d = pca_decompose(features)?;
    if d.rank < PCA_COMPONENTS {
        warn!(
            "feature map has rank {} < {PCA_COMPONENTS}; padding missing components with 0.5",
            d.rank
        );
    }
    let pixels = d.height * d.width;
    let mut raster = Raster::filled(PCA_COMPONENTS, d.height, d.width, 0.5);
    let variances = d.variances();
    for k in 0..PCA_COMPONENTS.min(d.rank) {
        let s = &d.scores[k];
        let (lo, hi) = s
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let band = raster.band_mut(k);
        for p in 0..pixels {
            band[p] = if hi > lo { (s[p] - lo) / (hi - lo) } else { 0.5 };
        }
    }
    Ok(PcaFeatures {
        raster,
        variances: variances
            .into_iter()
            .chain(std::iter::repeat(0.0))
            .take(PCA_COMPONENTS)
            .enumerate()
            .map(|(k, v)| if k < d.rank { v } else { 0.0 })
            .collect(),
        rank: d.rank,
    })
}

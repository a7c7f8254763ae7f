use rand::Rng;

use super::image::ImageGeometry;
use crate::autodiff::{Graph, NodeId, ParamStore};
use crate::error::{Error, Result};
use crate::layers::{Ctx, Init};

/// One backbone stage: 3×3 convolution, batch norm, relu.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage {
    pub channels: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Stage {
    pub fn out_side(&self, side: usize) -> Option<usize> {
        let padded = side + 2 * self.padding;
        (padded >= 3).then(|| (padded - 3) / self.stride + 1)
    }
}

/// Small CNN standing in for a pretrained backbone. It yields a spatial map
/// `[map_side, map_side, D_v]` and its spatial average.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisionBackboneConfig {
    pub geometry: ImageGeometry,
    pub stages: Vec<Stage>,
}

impl VisionBackboneConfig {
    /// Stride-2, padding-1 stages with the given channel plan.
    pub fn halving(resize_shortest: usize, input_side: usize, channels: &[usize]) -> Self {
        Self {
            geometry: ImageGeometry {
                resize_shortest,
                input_side,
            },
            stages: channels
                .iter()
                .map(|&channels| Stage {
                    channels,
                    stride: 2,
                    padding: 1,
                })
                .collect(),
        }
    }

    /// 56×56 input, four stages (16, 32, 48, 64), 4×4×64 map.
    pub fn desk() -> Self {
        Self::halving(64, 56, &[16, 32, 48, 64])
    }

    /// Unpadded stride-2 stages taking a 299×299 crop to an 8×8×2048 map.
    pub fn paper() -> Self {
        Self {
            geometry: ImageGeometry::PAPER,
            stages: [64, 128, 256, 512, 2048]
                .into_iter()
                .map(|channels| Stage {
                    channels,
                    stride: 2,
                    padding: 0,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.stages.is_empty() {
            return Err(Error::Config("backbone needs at least one stage".into()));
        }
        if self.stages.iter().any(|s| s.channels == 0 || s.stride == 0) {
            return Err(Error::Config("backbone channels and strides must be positive".into()));
        }
        self.try_map_side().map(|_| ())
    }

    fn try_map_side(&self) -> Result<usize> {
        self.stages.iter().try_fold(self.geometry.input_side, |side, s| {
            s.out_side(side).ok_or_else(|| {
                Error::Config(format!("backbone stage cannot shrink a {side}-pixel map"))
            })
        })
    }

    /// Side of the output map. Panics on a config that fails [`validate`](Self::validate).
    pub fn map_side(&self) -> usize {
        self.try_map_side().expect("validated backbone")
    }

    /// `D_v`, the channel depth of the map and the length of the pooled vector.
    pub fn map_channels(&self) -> usize {
        self.stages.last().map_or(0, |s| s.channels)
    }

    pub fn input_side(&self) -> usize {
        self.geometry.input_side
    }
}

pub fn init_backbone<R: Rng>(store: &mut ParamStore, prefix: &str, cfg: &VisionBackboneConfig, rng: &mut R) {
    let mut cin = 3;
    for (i, s) in cfg.stages.iter().enumerate() {
        Init::conv_block(store, &format!("{prefix}.stage{i}"), cin, s.channels, rng);
        cin = s.channels;
    }
}

/// Visual features of an image batch `[n, s, s, 3]`.
#[derive(Debug, Clone, Copy)]
pub struct VisionFeatures {
    /// `[n, D_v]`
    pub pooled: NodeId,
    /// `[n, map_side, map_side, D_v]`
    pub map: NodeId,
}

pub fn vision_features(
    ctx: &mut Ctx<'_>,
    g: &mut Graph,
    prefix: &str,
    cfg: &VisionBackboneConfig,
    images: NodeId,
) -> Result<VisionFeatures> {
    let side = cfg.input_side();
    match *g.value(images).shape() {
        [_, h, w, 3] if h == side && w == side => {}
        ref other => {
            return Err(Error::shape(
                "vision_features",
                format!("expected [n, {side}, {side}, 3], got {other:?}"),
            ))
        }
    }
    let mut x = images;
    for (i, s) in cfg.stages.iter().enumerate() {
        x = ctx.conv_block(g, &format!("{prefix}.stage{i}"), x, s.stride, s.padding)?;
    }
    let pooled = g.avg_pool(x)?;
    Ok(VisionFeatures { pooled, map: x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Mode, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn desk_and_paper_geometry() {
        let desk = VisionBackboneConfig::desk();
        desk.validate().unwrap();
        assert_eq!((desk.map_side(), desk.map_channels()), (4, 64));
        let paper = VisionBackboneConfig::paper();
        paper.validate().unwrap();
        assert_eq!((paper.map_side(), paper.map_channels()), (8, 2048));
    }

    #[test]
    fn pooled_is_mean_of_map() {
        let cfg = VisionBackboneConfig::halving(8, 8, &[4, 5]);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        init_backbone(&mut store, "vision", &cfg, &mut rng);
        let mut g = Graph::new(0);
        let mut ctx = Ctx::new(&store, Mode::Train, 0.0);
        let img = g.constant(Tensor::uniform(&[3, 8, 8, 3], 0.0, 1.0, &mut rng));
        let f = vision_features(&mut ctx, &mut g, "vision", &cfg, img).unwrap();
        let map = g.value(f.map);
        assert_eq!(map.shape(), &[3, 2, 2, 5]);
        let pooled = g.value(f.pooled).data();
        for n in 0..3 {
            for c in 0..5 {
                let mean = (0..4).map(|p| map.data()[(n * 4 + p) * 5 + c]).sum::<f64>() / 4.0;
                assert!((pooled[n * 5 + c] - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_input_zero_features() {
        let cfg = VisionBackboneConfig::halving(8, 8, &[4]);
        let mut store = ParamStore::new();
        init_backbone(&mut store, "vision", &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        for mode in [Mode::Eval, Mode::Train] {
            let mut g = Graph::new(0);
            let mut ctx = Ctx::new(&store, mode, 0.0);
            let img = g.constant(Tensor::zeros(&[2, 8, 8, 3]));
            let f = vision_features(&mut ctx, &mut g, "vision", &cfg, img).unwrap();
            assert!(g.value(f.map).data().iter().all(|&v| v == 0.0));
            assert!(g.value(f.pooled).data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn wrong_input_side_rejected() {
        let cfg = VisionBackboneConfig::halving(8, 8, &[4]);
        let mut store = ParamStore::new();
        init_backbone(&mut store, "vision", &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let mut g = Graph::new(0);
        let mut ctx = Ctx::new(&store, Mode::Eval, 0.0);
        let img = g.constant(Tensor::zeros(&[1, 6, 6, 3]));
        assert!(vision_features(&mut ctx, &mut g, "vision", &cfg, img).is_err());
    }
}

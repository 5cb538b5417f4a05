use crate::error::{Error, Result};

/// Ablation switches. The default is the reference network: spectral
/// mapping on, no batch normalization, one ReLU per block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Variant {
    /// Add the upsampled MS image to the fused residual.
    pub spectral_mapping: bool,
    /// Batch normalization after every convolution inside the blocks.
    pub batch_norm: bool,
    /// Extra ReLU after each depthwise convolution and after the concatenation.
    pub extra_relu: bool,
}

impl Default for Variant {
    fn default() -> Self {
        Self {
            spectral_mapping: true,
            batch_norm: false,
            extra_relu: false,
        }
    }
}

impl Variant {
    pub fn label(&self) -> String {
        format!(
            "sm={} bn={} relu+={}",
            on_off(self.spectral_mapping),
            on_off(self.batch_norm),
            on_off(self.extra_relu)
        )
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SdrcnnConfig {
    /// Multispectral band count.
    pub bands: usize,
    /// Feature maps per Addition Layer.
    pub width: usize,
    /// Inverted-bottleneck expansion of the hidden 1x1 layer.
    pub expansion: usize,
    pub n_residual_blocks: usize,
    /// Depthwise kernel size.
    pub kernel: usize,
    /// PAN / MS resolution ratio.
    pub upsample_factor: usize,
    pub variant: Variant,
}

pub const DEFAULT_WIDTH: usize = 52;
/// Smallest expansion for which width 52 and 8 bands reach ~100K parameters
/// (101,134).
pub const DEFAULT_EXPANSION: usize = 5;

impl Default for SdrcnnConfig {
    fn default() -> Self {
        Self {
            bands: 8,
            width: DEFAULT_WIDTH,
            expansion: DEFAULT_EXPANSION,
            n_residual_blocks: 3,
            kernel: 3,
            upsample_factor: 4,
            variant: Variant::default(),
        }
    }
}

impl SdrcnnConfig {
    pub fn with_bands(bands: usize) -> Self {
        Self {
            bands,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("model config: {m}")));
        if self.bands == 0 {
            return bad("bands must be > 0");
        }
        if self.width == 0 {
            return bad("width must be > 0");
        }
        if self.expansion == 0 {
            return bad("expansion must be > 0");
        }
        if self.n_residual_blocks == 0 {
            return bad("n_residual_blocks must be >= 1");
        }
        if self.kernel % 2 == 0 {
            return bad("kernel must be odd");
        }
        if self.upsample_factor == 0 {
            return bad("upsample_factor must be >= 1");
        }
        Ok(())
    }

    /// Channels entering the stem: PAN plus the upsampled MS bands.
    pub fn input_channels(&self) -> usize {
        self.bands + 1
    }

    pub fn hidden_channels(&self) -> usize {
        self.expansion * self.width
    }

    pub fn concat_channels(&self) -> usize {
        self.n_residual_blocks * self.width
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("bands", self.bands.to_string()),
            ("width", self.width.to_string()),
            ("expansion", self.expansion.to_string()),
            ("n_residual_blocks", self.n_residual_blocks.to_string()),
            ("kernel", self.kernel.to_string()),
            ("upsample_factor", self.upsample_factor.to_string()),
            ("spectral_mapping", self.variant.spectral_mapping.to_string()),
            ("batch_norm", self.variant.batch_norm.to_string()),
            ("extra_relu", self.variant.extra_relu.to_string()),
        ]
    }

    /// Applies one `key=value` setting; returns `false` for keys that are not
    /// model keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let int = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::parse("model config", format!("{key}: expected integer, got {v:?}")))
        };
        let flag = |v: &str| {
            v.parse::<bool>()
                .map_err(|_| Error::parse("model config", format!("{key}: expected true/false, got {v:?}")))
        };
        match key {
            "bands" => self.bands = int(value)?,
            "width" => self.width = int(value)?,
            "expansion" => self.expansion = int(value)?,
            "n_residual_blocks" => self.n_residual_blocks = int(value)?,
            "kernel" => self.kernel = int(value)?,
            "upsample_factor" => self.upsample_factor = int(value)?,
            "spectral_mapping" => self.variant.spectral_mapping = flag(value)?,
            "batch_norm" => self.variant.batch_norm = flag(value)?,
            "extra_relu" => self.variant.extra_relu = flag(value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

//! JSON model files.
//!
//! Floats are written in shortest round-trip form and parsed with exact
//! rounding, so a saved stack reloads bit-for-bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::AutoencoderStack;
use crate::error::{Error, Result};

const FORMAT: &str = "autoseg-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    stack: AutoencoderStack,
}

impl AutoencoderStack {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: FORMAT.to_string(),
            version: VERSION,
            stack: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(Error::Serialization(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        file.stack.check()?;
        Ok(file.stack)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{train_stack, StackConfig, TrainConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn bits(stack: &AutoencoderStack) -> Vec<u64> {
        stack
            .layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.encoder_bias).chain(&l.decoder_bias))
            .chain(stack.loss_history.iter().flatten())
            .map(|v| v.to_bits())
            .collect()
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(AutoencoderStack::from_json(r#"{"format":"other","version":1}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn save_load_bit_exact(seed in any::<u64>(), dim in 2usize..10, n in 2usize..12) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.random()).collect())
                .collect();
            let train = TrainConfig { seed, epochs: 3, ..Default::default() };
            let cfg = StackConfig::new(vec![dim.div_ceil(2), 1], train).unwrap();
            let stack = train_stack(&data, &cfg).unwrap();
            let f = tempfile::NamedTempFile::new().unwrap();
            stack.save(f.path()).unwrap();
            let back = AutoencoderStack::load(f.path()).unwrap();
            prop_assert_eq!(bits(&stack), bits(&back));
            prop_assert_eq!(&stack, &back);
        }
    }
}

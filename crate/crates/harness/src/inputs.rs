//! Registration channels built from a movie.

use anyhow::Result;
use tmri_core::harp::{movie_to_sharp, HarpFilter};
use tmri_core::imgcore::Image2D;
use tmri_core::phantom::Movie;

use crate::config::InputRepr;

/// A movie together with the per-frame channels that registration sees.
#[derive(Debug, Clone)]
pub struct PreparedMovie {
    pub index: usize,
    pub movie: Movie,
    /// `channels[n]` holds the horizontal then the vertical channel of frame `n`.
    pub channels: Vec<Vec<Image2D>>,
}

impl PreparedMovie {
    pub fn new(index: usize, movie: Movie, repr: InputRepr, tag_period: f64) -> Result<Self> {
        let channels = movie_channels(&movie, repr, tag_period)?;
        Ok(Self { index, movie, channels })
    }

    pub fn num_frames(&self) -> usize {
        self.channels.len()
    }
}

/// Per-frame channels for `repr`. Raw uses the two tagged magnitude images.
/// Sharp runs harmonic-phase extraction once per frame and maps the sHARP
/// values from [-1, 1] onto [0, 1] so that both representations share an
/// intensity range.
pub fn movie_channels(movie: &Movie, repr: InputRepr, tag_period: f64) -> Result<Vec<Vec<Image2D>>> {
    match repr {
        InputRepr::Raw => Ok((0..movie.num_frames())
            .map(|n| vec![movie.frames_h[n].clone(), movie.frames_v[n].clone()])
            .collect()),
        InputRepr::Sharp => {
            let filter = HarpFilter::for_period(tag_period);
            let to_unit = |s: &Image2D| s.map(|v| 0.5 * (v + 1.0));
            Ok(movie_to_sharp(movie, &filter, &filter)?
                .iter()
                .map(|f| vec![to_unit(&f.h), to_unit(&f.v)])
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::dataset::simulate_index;
    use tmri_core::harp::{extract_harmonic_phase_complex, sharp_transform};
    use tmri_core::spamm::TagDirection;

    fn movie() -> (ExperimentConfig, Movie) {
        let cfg = ExperimentConfig { image_size: 32, num_frames: 3, tag_period_px: 6.0, ..Default::default() };
        let m = simulate_index(&cfg, 0).unwrap();
        (cfg, m)
    }

    #[test]
    fn raw_channels_are_the_magnitude_frames() {
        let (cfg, m) = movie();
        let ch = movie_channels(&m, InputRepr::Raw, cfg.tag_period_px).unwrap();
        assert_eq!(ch.len(), 3);
        assert_eq!(ch[2], vec![m.frames_h[2].clone(), m.frames_v[2].clone()]);
    }

    #[test]
    fn sharp_channels_are_unit_mapped_sharp() {
        let (cfg, m) = movie();
        let ch = movie_channels(&m, InputRepr::Sharp, cfg.tag_period_px).unwrap();
        assert_eq!(ch.len(), m.num_frames());
        let filter = HarpFilter::for_period(cfg.tag_period_px);
        let phase = extract_harmonic_phase_complex(&m.complex_v[1], &filter, TagDirection::Vertical).unwrap();
        let expect = sharp_transform(&phase).map(|v| 0.5 * (v + 1.0));
        assert_eq!(ch[1][1], expect);
        assert!(ch.iter().flatten().all(|c| c.data().iter().all(|v| (0.0..=1.0).contains(v))));
    }
}

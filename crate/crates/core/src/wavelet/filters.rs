use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimum-phase Daubechies scaling filters, `h[0]` first.
const DB2: [f64; 4] = [
    0.482_962_913_144_534_143_374_9,
    0.836_516_303_737_807_905_575_3,
    0.224_143_868_042_013_381_026,
    -0.129_409_522_551_260_381_174_4,
];
const DB3: [f64; 6] = [
    0.332_670_552_950_082_615_998_5,
    0.806_891_509_311_092_576_494_5,
    0.459_877_502_118_491_570_095_2,
    -0.135_011_020_010_254_588_696_4,
    -0.085_441_273_882_026_661_692_82,
    0.035_226_291_885_709_536_602_74,
];
const DB4: [f64; 8] = [
    0.230_377_813_308_896_500_863_3,
    0.714_846_570_552_915_647_089_9,
    0.630_880_767_929_858_907_881_7,
    -0.027_983_769_416_859_854_211_41,
    -0.187_034_811_719_093_084_079_6,
    0.030_841_381_835_560_763_627_22,
    0.032_883_011_666_885_199_735_41,
    -0.010_597_401_785_069_032_104_88,
];
const DB5: [f64; 10] = [
    0.160_102_397_974_192_914_480_7,
    0.603_829_269_797_189_670_540_1,
    0.724_308_528_437_772_927_728_1,
    0.138_428_145_901_320_731_505_4,
    -0.242_294_887_066_382_031_862_6,
    -0.032_244_869_584_638_374_648_48,
    0.077_571_493_840_045_713_523_13,
    -0.006_241_490_212_798_274_274_191,
    -0.012_580_751_999_081_999_468_51,
    0.003_335_725_285_473_771_277_998,
];
const DB6: [f64; 12] = [
    0.111_540_743_350_109_463_621_3,
    0.494_623_890_398_453_085_677_2,
    0.751_133_908_021_095_350_678_9,
    0.315_250_351_709_197_629_086,
    -0.226_264_693_965_439_820_076_3,
    -0.129_766_867_567_261_935_562_3,
    0.097_501_605_587_323_049_102_34,
    0.027_522_865_530_305_728_625_54,
    -0.031_582_039_317_486_029_565_08,
    0.000_553_842_201_161_496_139_251_9,
    0.004_777_257_510_945_510_639_636,
    -0.001_077_301_085_308_479_564_853,
];

/// Supported Daubechies family members, named by vanishing moments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WaveletName {
    Db2,
    Db3,
    Db4,
    Db5,
    Db6,
}

impl WaveletName {
    pub const ALL: [WaveletName; 5] = [Self::Db2, Self::Db3, Self::Db4, Self::Db5, Self::Db6];

    pub fn vanishing_moments(self) -> usize {
        match self {
            Self::Db2 => 2,
            Self::Db3 => 3,
            Self::Db4 => 4,
            Self::Db5 => 5,
            Self::Db6 => 6,
        }
    }

    fn taps(self) -> &'static [f64] {
        match self {
            Self::Db2 => &DB2,
            Self::Db3 => &DB3,
            Self::Db4 => &DB4,
            Self::Db5 => &DB5,
            Self::Db6 => &DB6,
        }
    }
}

impl fmt::Display for WaveletName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "db{}", self.vanishing_moments())
    }
}

impl FromStr for WaveletName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WaveletName::ALL
            .into_iter()
            .find(|w| w.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownWavelet(s.to_string()))
    }
}

/// Orthonormal analysis/synthesis quadruple.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletFilter<T> {
    pub name: WaveletName,
    pub dec_lo: Vec<T>,
    pub dec_hi: Vec<T>,
    pub rec_lo: Vec<T>,
    pub rec_hi: Vec<T>,
}

impl<T: Scalar> WaveletFilter<T> {
    pub fn new(name: WaveletName) -> Self {
        let lo: Vec<f64> = name.taps().to_vec();
        let len = lo.len();
        // Quadrature mirror: hi[i] = (-1)^i lo[len-1-i].
        let hi: Vec<f64> = (0..len)
            .map(|i| if i % 2 == 0 { lo[len - 1 - i] } else { -lo[len - 1 - i] })
            .collect();
        let conv = |v: &[f64]| v.iter().map(|&c| T::lit(c)).collect::<Vec<_>>();
        let rev = |v: &[f64]| v.iter().rev().map(|&c| T::lit(c)).collect::<Vec<_>>();
        Self {
            name,
            dec_lo: conv(&lo),
            dec_hi: conv(&hi),
            rec_lo: rev(&lo),
            rec_hi: rev(&hi),
        }
    }

    pub fn len(&self) -> usize {
        self.dec_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dec_lo.is_empty()
    }
}

/// Looks up a filter by name (`db2` .. `db6`).
pub fn make_filter<T: Scalar>(name: &str) -> Result<WaveletFilter<T>> {
    Ok(WaveletFilter::new(name.parse()?))
}

use std::sync::OnceLock;

use super::{ClassId, Technology, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Gfsk,
    DbpskBarker,
    DqpskBarker,
    Cck5_5,
    Cck11,
    OqpskDsss,
}

/// Scheme-specific pulse-shaping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shaping {
    /// Gaussian-filtered frequency pulse; `bt` is the bandwidth-time product.
    Gaussian { bt: f64, modulation_index: f64 },
    /// Rectangular chips at `chip_rate_hz` (802.11b DSSS and CCK).
    RectChips { chip_rate_hz: f64 },
    /// Offset-QPSK with half-sine chip pulses (802.15.4).
    HalfSine { chip_rate_hz: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationVariant {
    pub name: String,
    pub technology: Technology,
    /// Data symbols per second.
    pub symbol_rate: f64,
    pub scheme: Scheme,
    pub shaping: Shaping,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub class_id: ClassId,
    pub technology: Technology,
    /// Channel center relative to the sub-band center.
    pub center_offset_hz: f64,
    pub occupied_bandwidth_hz: f64,
    pub variant_set: Vec<ModulationVariant>,
}

/// Gaussian BT values crossed with the modulation indices below give the
/// 14 IEEE 802.15.1 variants (basic rate h = 0.28..0.35, LE 1M h = 0.45..0.55).
const GFSK_BT: [f64; 2] = [0.5, 0.3];
const GFSK_INDEX: [f64; 7] = [0.28, 0.30, 0.32, 0.35, 0.45, 0.50, 0.55];

const WLAN_CHIP_RATE: f64 = 11.0e6;
const ZB_CHIP_RATE: f64 = 2.0e6;

fn technology_variants(tech: Technology) -> Vec<ModulationVariant> {
    match tech {
        Technology::Bt15_1 => GFSK_BT
            .iter()
            .flat_map(|&bt| {
                GFSK_INDEX.iter().map(move |&h| ModulationVariant {
                    name: format!("gfsk-1m-h{h:.2}-bt{bt:.1}"),
                    technology: tech,
                    symbol_rate: 1.0e6,
                    scheme: Scheme::Gfsk,
                    shaping: Shaping::Gaussian { bt, modulation_index: h },
                })
            })
            .collect(),
        Technology::Wlan11bg => {
            let chips = Shaping::RectChips { chip_rate_hz: WLAN_CHIP_RATE };
            [
                ("dsss-1m-dbpsk-barker", 1.0e6, Scheme::DbpskBarker),
                ("dsss-2m-dqpsk-barker", 1.0e6, Scheme::DqpskBarker),
                ("cck-5.5m", WLAN_CHIP_RATE / 8.0, Scheme::Cck5_5),
                ("cck-11m", WLAN_CHIP_RATE / 8.0, Scheme::Cck11),
            ]
            .into_iter()
            .map(|(name, symbol_rate, scheme)| ModulationVariant {
                name: name.to_string(),
                technology: tech,
                symbol_rate,
                scheme,
                shaping: chips,
            })
            .collect()
        }
        Technology::Zb15_4 => vec![ModulationVariant {
            name: "oqpsk-250k-dsss".to_string(),
            technology: tech,
            symbol_rate: ZB_CHIP_RATE / 32.0,
            scheme: Scheme::OqpskDsss,
            shaping: Shaping::HalfSine { chip_rate_hz: ZB_CHIP_RATE },
        }],
    }
}

fn build_catalog() -> Vec<ClassSpec> {
    ClassId::all()
        .map(|class_id| {
            let i = class_id.index() as f64;
            let technology = class_id.technology();
            let (center_offset_hz, occupied_bandwidth_hz) = match technology {
                // 1 MHz raster across the sub-band
                Technology::Bt15_1 => ((-4.5 + i) * 1.0e6, 1.0e6),
                // 5 MHz raster; 22 MHz wide, so only partially in band
                Technology::Wlan11bg => ((-5.0 + 5.0 * (i - 10.0)) * 1.0e6, 22.0e6),
                Technology::Zb15_4 => ((-2.5 + 5.0 * (i - 13.0)) * 1.0e6, 2.0e6),
            };
            ClassSpec {
                class_id,
                technology,
                center_offset_hz,
                occupied_bandwidth_hz,
                variant_set: technology_variants(technology),
            }
        })
        .collect()
}

fn catalog() -> &'static [ClassSpec] {
    static CATALOG: OnceLock<Vec<ClassSpec>> = OnceLock::new();
    CATALOG.get_or_init(build_catalog)
}

/// The 15 class specifications, in class-index order.
///
/// The variant sets are a reconstruction: the 802.15.1 set sweeps GFSK
/// modulation index over the basic-rate and LE 1M ranges at two Gaussian
/// filter bandwidths (14 variants), 802.11 b/g is represented by the four
/// 802.11b DSSS/CCK rates and 802.15.4 by its 2.4 GHz O-QPSK PHY, 19 in total.
pub fn class_catalog() -> Vec<ClassSpec> {
    catalog().to_vec()
}

pub fn class_spec(class_id: ClassId) -> &'static ClassSpec {
    &catalog()[class_id.index()]
}

/// All distinct modulation variants across the three technologies.
pub fn variant_catalog() -> Vec<&'static ModulationVariant> {
    Technology::ALL
        .iter()
        .map(|&t| &catalog()[t.classes().next().unwrap().index()].variant_set)
        .flat_map(|set| set.iter())
        .collect()
}

const _: () = assert!(NUM_CLASSES == 15);

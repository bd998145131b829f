//! Annual Yangtze River Delta series, 2004-2018, with published model outputs.

use crate::model::TimeSeries;

pub const FIRST_YEAR: u32 = 2004;
/// Years 2004-2014 train, 2015-2018 test.
pub const TRAIN_LEN: usize = 11;

/// Published fitted values and errors for one model column of a results table.
#[derive(Debug, Clone, Copy)]
pub struct PublishedModel {
    pub name: &'static str,
    pub values: [f64; 15],
    pub ape: [f64; 15],
    pub mape_train: f64,
    pub mape_test: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Dataset {
    pub name: &'static str,
    pub unit: &'static str,
    pub values: [f64; 15],
    pub models: [PublishedModel; 3],
    /// Published three-step forecasts for 2019-2021 from the power model with linear term.
    pub forecasts: [f64; 3],
}

impl Dataset {
    /// Series stamped `t = 1..15`.
    pub fn series(&self) -> TimeSeries {
        TimeSeries::unit_spaced(&self.values).expect("embedded data is valid")
    }

    pub fn years(&self) -> Vec<u32> {
        (0..self.values.len() as u32).map(|k| FIRST_YEAR + k).collect()
    }

    pub fn model(&self, name: &str) -> Option<&PublishedModel> {
        self.models.iter().find(|m| m.name.eq_ignore_ascii_case(name))
    }
}

pub const SEWAGE: Dataset = Dataset {
    name: "sewage",
    unit: "1e8 m3",
    values: [
        83.00, 85.58, 77.89, 80.45, 87.27, 88.11, 92.53, 95.08, 97.88, 99.82, 102.24, 106.27, 110.02,
        111.40, 116.05,
    ],
    models: [
        PublishedModel {
            name: "IGVM",
            values: [
                78.85, 80.46, 82.22, 84.13, 86.23, 88.51, 90.99, 93.70, 96.65, 99.87, 103.38, 107.21,
                111.40, 115.98, 121.00,
            ],
            ape: [
                5.00, 5.98, 5.56, 4.59, 1.19, 0.45, 1.66, 1.44, 1.25, 0.05, 1.11, 0.88, 1.25, 4.11, 4.27,
            ],
            mape_train: 2.57,
            mape_test: 2.63,
        },
        PublishedModel {
            name: "INGM",
            values: [
                77.92, 79.83, 81.90, 84.09, 86.40, 88.83, 91.38, 94.04, 96.81, 99.71, 102.72, 105.86,
                109.13, 112.53, 116.07,
            ],
            ape: [
                6.12, 6.72, 5.14, 4.53, 0.99, 0.82, 1.25, 1.09, 1.09, 0.11, 0.47, 0.39, 0.81, 1.01, 0.02,
            ],
            mape_train: 2.58,
            mape_test: 0.56,
        },
        PublishedModel {
            name: "INGBM",
            values: [
                77.33, 79.54, 81.81, 84.15, 86.55, 89.03, 91.57, 94.19, 96.88, 99.65, 102.50, 105.43,
                108.44, 111.54, 114.73,
            ],
            ape: [
                6.84, 7.06, 5.03, 4.60, 0.82, 1.04, 1.04, 0.93, 1.02, 0.17, 0.25, 0.80, 1.44, 0.12, 1.14,
            ],
            mape_train: 2.62,
            mape_test: 0.87,
        },
    ],
    forecasts: [118.01, 121.38, 124.85],
};

pub const WATER: Dataset = Dataset {
    name: "water",
    unit: "1e9 m3",
    values: [
        1061.25, 1058.94, 1115.09, 1121.56, 1161.07, 1164.05, 1174.64, 1173.80, 1155.60, 1194.20,
        1162.20, 1153.10, 1154.00, 1165.90, 1155.00,
    ],
    models: [
        PublishedModel {
            name: "IGVM",
            values: [
                1038.08, 1071.36, 1101.01, 1126.53, 1147.49, 1163.51, 1174.31, 1179.69, 1179.54,
                1173.88, 1162.79, 1146.50, 1125.29, 1099.54, 1069.69,
            ],
            ape: [
                2.18, 1.17, 1.26, 0.44, 1.17, 0.05, 0.03, 0.50, 2.07, 1.70, 0.05, 0.57, 2.49, 5.69, 7.39,
            ],
            mape_train: 0.75,
            mape_test: 4.03,
        },
        PublishedModel {
            name: "INGM",
            values: [
                1040.04, 1082.30, 1107.61, 1125.75, 1139.90, 1151.51, 1161.36, 1169.92, 1177.47,
                1184.25, 1190.38, 1195.99, 1201.16, 1205.94, 1210.40,
            ],
            ape: [
                2.00, 2.21, 0.67, 0.37, 1.82, 1.08, 1.13, 0.33, 1.89, 0.83, 2.43, 3.72, 4.09, 3.43, 4.80,
            ],
            mape_train: 1.24,
            mape_test: 4.01,
        },
        PublishedModel {
            name: "INGBM",
            values: [
                1001.65, 1064.60, 1106.32, 1135.37, 1155.52, 1168.91, 1176.93, 1180.56, 1180.54,
                1177.45, 1171.73, 1163.79, 1153.93, 1142.42, 1129.51,
            ],
            ape: [
                5.62, 0.53, 0.79, 1.23, 0.48, 0.42, 0.20, 0.58, 2.16, 1.40, 0.82, 0.93, 0.01, 2.01, 2.21,
            ],
            mape_train: 0.91,
            mape_test: 1.29,
        },
    ],
    forecasts: [1115.4, 1100.2, 1084.2],
};

pub fn by_name(name: &str) -> Option<&'static Dataset> {
    match name.to_ascii_lowercase().as_str() {
        "sewage" => Some(&SEWAGE),
        "water" => Some(&WATER),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ape;

    #[test]
    fn published_apes_are_consistent() {
        for ds in [&SEWAGE, &WATER] {
            for m in &ds.models {
                let ours = ape(&m.values, &ds.values).unwrap();
                for (k, (a, b)) in ours.iter().zip(&m.ape).enumerate() {
                    assert!((a - b).abs() <= 0.02, "{} {} row {k}: {a} vs {b}", ds.name, m.name);
                }
            }
        }
    }

    #[test]
    fn published_test_mapes_match_their_apes() {
        for ds in [&SEWAGE, &WATER] {
            for m in &ds.models {
                let test: f64 = m.ape[TRAIN_LEN..].iter().sum::<f64>() / 4.0;
                assert!((test - m.mape_test).abs() <= 0.01, "{} {}", ds.name, m.name);
            }
        }
    }
}

//! Nemenyi critical values q_α = studentized-range quantile / √2 (infinite df).
//! Generated by `examples/gen_q_table.rs`; do not edit by hand.

/// Largest pipeline count covered by the table.
pub const MAX_PIPELINES: usize = 50;

/// α = 0.05; entry i is m = i + 2.
pub const Q_05: [f64; 49] = [
    1.959964,
    2.343701,
    2.569032,
    2.727774,
    2.849705,
    2.948320,
    3.030878,
    3.101730,
    3.163684,
    3.218654,
    3.268004,
    3.312739,
    3.353618,
    3.391230,
    3.426041,
    3.458425,
    3.488685,
    3.517073,
    3.543799,
    3.569040,
    3.592946,
    3.615646,
    3.637252,
    3.657861,
    3.677556,
    3.696413,
    3.714498,
    3.731869,
    3.748578,
    3.764672,
    3.780193,
    3.795179,
    3.809664,
    3.823680,
    3.837254,
    3.850413,
    3.863181,
    3.875579,
    3.887627,
    3.899344,
    3.910747,
    3.921852,
    3.932673,
    3.943224,
    3.953518,
    3.963566,
    3.973379,
    3.982969,
    3.992343,
];

/// α = 0.1; entry i is m = i + 2.
pub const Q_10: [f64; 49] = [
    1.644854,
    2.052293,
    2.291341,
    2.459516,
    2.588521,
    2.692732,
    2.779884,
    2.854606,
    2.919889,
    2.977768,
    3.029694,
    3.076733,
    3.119693,
    3.159199,
    3.195743,
    3.229723,
    3.261461,
    3.291224,
    3.319233,
    3.345676,
    3.370712,
    3.394477,
    3.417089,
    3.438651,
    3.459253,
    3.478971,
    3.497878,
    3.516033,
    3.533492,
    3.550305,
    3.566516,
    3.582165,
    3.597288,
    3.611917,
    3.626084,
    3.639814,
    3.653134,
    3.666066,
    3.678631,
    3.690848,
    3.702736,
    3.714312,
    3.725590,
    3.736584,
    3.747310,
    3.757778,
    3.768000,
    3.777987,
    3.787750,
];

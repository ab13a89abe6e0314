//! Local point processes of a gas: bulk rescaling N^{1/n}(x − E), the edge chart φ_N, and
//! goodness-of-fit statistics against Poisson and Gumbel limits.

mod analysis;
mod correlations;
mod edge;
mod sample;
mod stats;

pub use analysis::{edge_analysis, gumbel_analysis, BulkAnalysis, BulkSettings, EdgeSettings, GumbelSettings};
pub use correlations::{estimate_correlations, CorrelationHistogram, MIN_BIN_COUNT, MIN_CORRELATION_REPLICAS};
pub use edge::{
    build_edge_frame, edge_expected_count, edge_intensity, edge_radius_log, edge_radius_riesz, edge_rotation,
    gumbel_cdf, gumbel_statistic, gumbel_statistic_from_max, EdgeFrame, FrameMargins, DEFAULT_FRAME_THRESHOLD,
};
pub use sample::{extract_bulk_local, extract_edge_local, FrameRecord, PointSample, Window};
pub use stats::{
    chi_square_poisson, count_in_windows, dispersion_test, gap_statistics, kolmogorov_p_value, ks_statistic, ks_test,
    poisson_process, ChiSquareResult, DispersionResult, KsResult, StatReport, Verdict, WindowCounts, MIN_EXPECTED,
    MIN_REPLICAS,
};

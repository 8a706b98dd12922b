//! Learning curves, sample efficiency, and file artifacts.

mod artifacts;
mod curves;
mod svg;

pub use artifacts::{
    bucket_bar_scale, bucket_bars_svg, curves_csv_string, emit_artifacts, learning_curves_svg, map_svg,
    parse_curves_csv, parse_profiles_csv, profiles_csv_string, Manifest, ManifestEntry, CURVES_CSV_HEADER,
    PROFILES_CSV_HEADER,
};
pub use curves::{
    aggregate_curves, default_target, efficiency_csv, efficiency_table, examples_to_reach, sample_efficiency, sample_efficiency_xy, CurvePoint,
    EfficiencyRow, LearningCurve, SampleEfficiency, EFFICIENCY_CSV_HEADER,
};

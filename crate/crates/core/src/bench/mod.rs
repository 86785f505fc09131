//! Synthetic instances, file formats and the benchmark case registry.

mod cases;
mod coo;
mod instance;

pub use cases::{
    case_spec, median, run_case, run_seed, summarize, CaseReport, CaseSpec, RunReport, RunSpec, RunSummary,
    SeedReport, CASE_IDS, DEFAULT_SEEDS,
};
pub use coo::{fmt_real, load_coo, load_point, read_coo, save_coo, save_point, write_coo, PointFile};
pub use instance::{
    conditioned_core, dim_quotient, gen_instance, init_point, set_sizes, Instance, InstanceSpec, Split,
};

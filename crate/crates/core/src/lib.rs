//! Choosing which cellular base-stations to upgrade so that as many user
//! trajectories as possible meet a quality-of-experience threshold.

pub mod evaluation;
pub mod fixtures;
pub mod generator;
pub mod hypergraph;
pub mod io;
pub mod model;
pub mod rng;
pub mod solvers;

pub use evaluation::{compare_report, compare_results, run_sweep, SweepResult, SweepRow, SweepSpec};
pub use generator::{
    generate_mesh, generate_scenario, generate_star, GenError, GeneratedScenario,
    GeneratedStation, Preset, ScenarioConfig, Topology,
};
pub use hypergraph::{build_hypergraph, set_weight, HyperGraph};
pub use io::{read_trace, write_trace, StationRegistry};
pub use model::{
    build_instance, evaluate_solution, step_utility, trajectory_utility, ModelError,
    ProblemInstance, StationId, Trajectory, TrajectoryId, UpgradeSolution, VisitRecord,
};
pub use solvers::{
    prune_infeasible, solve, solve_decg, solve_decg_with, solve_exact, solve_exact_capped,
    solve_incg, solve_simg, Algorithm, DecgOptions, SolveError, SolverReport,
};

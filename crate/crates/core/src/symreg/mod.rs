//! Genetic-programming symbolic regression over `(t, l1, l2, l3)`.

pub mod constants;
pub mod expr;
pub mod fitness;
pub mod gp;
pub mod pareto;

pub use constants::optimize_constants;
pub use expr::{complexity, complexity_weighted, format_const, ComplexityWeights, Expr, Program, Var};
pub use fitness::{derivative_pair_fitness, r_squared, ss_res, ss_tot, RegressionData, Target};
pub use gp::{crossover, front_csv, mutate, random_expr, run_gp, tournament_select, FitnessMode, GpConfig};
pub use pareto::{ParetoEntry, ParetoFront};

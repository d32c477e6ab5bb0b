//! Rebalance-signal research pipeline: OHLCV ingestion, classical feature
//! engineering, rebalance labels, a statevector quantum simulator, classical,
//! quantum and hybrid classifiers, and portfolio backtests with multi-run
//! statistics.

pub mod backtest;
pub mod features;
pub mod hybrid;
pub mod labeling;
pub mod market_data;
pub mod models;
pub mod qsim;
pub mod runner;
pub mod stats;

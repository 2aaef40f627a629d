pub mod evaluate;
pub mod generate;
pub mod preprocess;
pub mod split;
pub mod train;

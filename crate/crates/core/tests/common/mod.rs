pub mod precise;

pub mod certify;
pub mod cli;
pub mod config;
pub mod disorder;
pub mod domain;
pub mod dump;
pub mod eigen;
pub mod ensemble;
pub mod hartree;
pub mod interaction;
pub mod laplace;
pub mod manybody;

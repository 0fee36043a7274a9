//! Traveling fronts for bistable reaction with Riesz-Feller fractional diffusion,
//! u_t = D^alpha_theta u + f(u).


pub mod cauchy_solver;
pub mod export;
pub mod field_grid;
pub mod nonlinearity;
pub mod quadrature;
pub mod riesz_feller;
pub mod spectral;
pub mod stable_kernel;
pub mod stats;
pub mod wave_lab;


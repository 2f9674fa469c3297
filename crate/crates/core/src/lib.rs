//! Interactive evolution of vertex-shader displacement expressions.
//!
//! - [`expr`]: GP trees, random generation, genetic operators, interpreter,
//!   s-expression form.
//! - [`evolution`]: sessions, similarity fitness, breeding, display subsets.
//! - [`codegen`]: GLSL vertex shader emission.
//! - [`store`]: file-backed transformations and meshes.
//! - [`api`]: the HTTP service.
//! - [`cli`]: scripted, headless evolution.

pub mod api;
pub mod cli;
pub mod codegen;
pub mod evolution;
pub mod expr;
pub mod store;

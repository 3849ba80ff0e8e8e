pub mod cone;

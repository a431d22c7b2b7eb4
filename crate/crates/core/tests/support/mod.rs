pub mod static_oracle;

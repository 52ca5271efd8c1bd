//! Row-major nested-array serde adapters for fixed-size matrices.

pub mod mat6 {
    use nalgebra::Matrix6;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix6<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<[f64; 6]> = (0..6)
            .map(|i| std::array::from_fn(|j| m[(i, j)]))
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix6<f64>, D::Error> {
        let rows = <[[f64; 6]; 6]>::deserialize(d)?;
        Ok(Matrix6::from_fn(|i, j| rows[i][j]))
    }
}

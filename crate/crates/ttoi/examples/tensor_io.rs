//! Round-trip a tensor through the binary file format and show how format
//! errors report byte offsets.
//!
//! Run with `cargo run --release --example tensor_io`.

use ttoi::io::{read_tensor, read_tensor_bytes, write_tensor};
use ttoi::rng::SeededRng;
use ttoi::tensor::DenseTensor;

fn main() -> ttoi::Result<()> {
    let mut rng = SeededRng::new(3, 0);
    let dims = vec![4usize, 3, 5];
    let n: usize = dims.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let t = DenseTensor::new(dims, data)?;

    let dir = std::env::temp_dir().join("ttoi_tensor_io_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("example.tnsr");
    write_tensor(&path, &t)?;
    let back = read_tensor(&path)?;
    let bit_exact = back
        .data()
        .iter()
        .zip(t.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    println!("round trip of {:?}: bit exact = {}", path, bit_exact);

    let bytes = std::fs::read(&path)?;
    match read_tensor_bytes(&bytes[..bytes.len() - 5]) {
        Err(e) => println!("truncated file rejected: {}", e),
        Ok(_) => unreachable!(),
    }
    let mut corrupt = bytes.clone();
    corrupt[0] = b'X';
    match read_tensor_bytes(&corrupt) {
        Err(e) => println!("corrupt magic rejected: {}", e),
        Ok(_) => unreachable!(),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

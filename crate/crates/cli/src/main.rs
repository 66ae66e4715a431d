fn main() { println!("tangle"); }

fn main() {
    // The dense kernels (LU, eigendecomposition, gemm) dispatch to the system
    // OpenBLAS, which carries the full LAPACK symbol set.
    println!("cargo:rustc-link-lib=dylib=openblas");
}

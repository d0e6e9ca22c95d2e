use blocksparse::threshold::*;
use std::time::Instant;
fn main() {
    let t0 = Instant::now();
    for &a in &[0.3, 0.5, 0.7, 0.9] {
        let bs = threshold_beta(ThresholdKind::Strong, a, 500, 0.0).unwrap();
        let bw = threshold_beta(ThresholdKind::Weak, a, 500, 0.0).unwrap();
        let bs_inf = (1.0 - (1.0f64 - a).sqrt()) / 2.0;
        let bw_inf = 1.0 - (1.0f64 - a).sqrt();
        println!("a={a}: strong {:.4} (inf {:.4}, gap {:.4}) weak {:.4} (inf {:.4}, gap {:.4})",
            bs.beta, bs_inf, (bs.beta - bs_inf).abs(), bw.beta, bw_inf, (bw.beta - bw_inf).abs());
    }
    println!("d=500 limits took {:?}", t0.elapsed());
    let t0 = Instant::now();
    let b = threshold_beta(ThresholdKind::Weak, 0.5, 15, 0.0).unwrap();
    println!("weak a=0.5 d=15: 100*beta = {:.3}  ({:?})", 100.0 * b.beta, t0.elapsed());
    let t0 = Instant::now();
    let mut v = 0.0;
    for &a in &[0.1, 0.3, 0.5, 0.7, 0.9] {
        for &d in &[1u32, 3, 15, 50] {
            for kind in [ThresholdKind::Strong, ThresholdKind::Sectional, ThresholdKind::Weak] {
                v += threshold_beta(kind, a, d, 0.0).unwrap().beta;
            }
        }
    }
    println!("ordering grid (60 calls) took {:?} (checksum {v:.3})", t0.elapsed());
}

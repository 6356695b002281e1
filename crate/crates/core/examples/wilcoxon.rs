//! Paired Wilcoxon signed-rank test on per-participant response times.

use wrapped_haptics::psychophysics::wilcoxon_signed_rank;

fn main() -> wrapped_haptics::Result<()> {
    let local = [14.2, 17.8, 12.9, 15.6, 20.1, 13.3, 16.4, 11.8, 18.0, 14.9];
    let global = [11.0, 13.9, 12.2, 12.5, 15.3, 10.1, 13.6, 11.9, 12.4, 11.7];
    let r = wilcoxon_signed_rank(&local, &global)?;
    println!("n = {}, W+ = {}, W- = {}, Z = {:.3}, p = {:.4}", r.n, r.w_plus, r.w_minus, r.z, r.p);
    Ok(())
}

use crate::error::{Error, Result};

/// Splits `total_hidden` units across clusters in proportion to their sizes
/// using largest-remainder apportionment with at least one unit per branch.
///
/// Floors of the exact quotas are clamped to 1. Leftover units go to the
/// branches with the largest fractional remainders (smaller id first on
/// ties). If the clamping overshoots, units are taken back from branches
/// wider than 1 with the smallest remainders (larger id first on ties).
pub fn allocate_hidden(cluster_sizes: &[usize], total_hidden: usize) -> Result<Vec<usize>> {
    let k = cluster_sizes.len();
    if k == 0 || total_hidden < k || cluster_sizes.contains(&0) {
        return Err(Error::InfeasibleAllocation {
            total_hidden,
            clusters: k,
        });
    }
    let d: usize = cluster_sizes.iter().sum();
    // Exact integer arithmetic: quota_i = total * m_i / d.
    let numer: Vec<usize> = cluster_sizes.iter().map(|&m| total_hidden * m).collect();
    let mut widths: Vec<usize> = numer.iter().map(|&q| (q / d).max(1)).collect();
    let remainder = |i: usize| numer[i] % d;

    let assigned: usize = widths.iter().sum();
    if assigned < total_hidden {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| remainder(b).cmp(&remainder(a)).then(a.cmp(&b)));
        let mut left = total_hidden - assigned;
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            widths[i] += 1;
            left -= 1;
        }
    } else if assigned > total_hidden {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| remainder(a).cmp(&remainder(b)).then(b.cmp(&a)));
        let mut surplus = assigned - total_hidden;
        while surplus > 0 {
            for &i in &order {
                if surplus == 0 {
                    break;
                }
                if widths[i] > 1 {
                    widths[i] -= 1;
                    surplus -= 1;
                }
            }
        }
    }
    debug_assert_eq!(widths.iter().sum::<usize>(), total_hidden);
    Ok(widths)
}

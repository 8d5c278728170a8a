/// Movements that at some recorded instant held a queue and then stayed red
/// at every recorded instant for at least `window` seconds.
///
/// `times[k]`, `queues[k][m]` and `served[k][m]` describe decision step `k`.
pub fn detect_starvation(
    times: &[f64],
    served: &[Vec<bool>],
    queues: &[Vec<usize>],
    window: f64,
) -> Vec<usize> {
    let Some(first) = served.first() else {
        return Vec::new();
    };
    let movements = first.len();
    let mut out = Vec::new();
    for m in 0..movements {
        let mut start: Option<f64> = None;
        let mut flagged = false;
        for k in 0..times.len() {
            if served[k][m] {
                start = None;
                continue;
            }
            if start.is_none() && queues[k][m] > 0 {
                start = Some(times[k]);
            }
            if start.is_some_and(|t0| times[k] - t0 >= window) {
                flagged = true;
                break;
            }
        }
        if flagged {
            out.push(m);
        }
    }
    out
}

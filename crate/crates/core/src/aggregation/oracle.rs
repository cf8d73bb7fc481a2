use crate::error::{Error, Result};

/// How the delayed average treats updates from before the first round.
#[derive(Debug, Clone, Copy)]
pub enum PreHistory<'a> {
    /// Missing history is an error.
    Error,
    /// Missing updates are the common initial model.
    InitialModel(&'a [f64]),
    /// Missing updates are left out and the average is over the rest.
    Omit,
}

/// Expected models after round `t = history.len() − 1`:
/// `x_i = mean_j u_j^{t − τ_ij}`, where `history[s][j]` is node `j`'s update in round `s`.
pub fn delayed_average_oracle(
    history: &[Vec<Vec<f64>>],
    tau: &[Vec<usize>],
    pre: PreHistory<'_>,
) -> Result<Vec<Vec<f64>>> {
    let n = tau.len();
    let t = history
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::Invalid("empty update history".into()))?;
    if history.iter().any(|round| round.len() != n) {
        return Err(Error::Shape(format!("every round must hold {n} updates")));
    }
    let dim = history[0].first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(n);
    for (i, row) in tau.iter().enumerate() {
        let mut acc = vec![0.0; dim];
        let mut terms = 0usize;
        for (j, &delay) in row.iter().enumerate() {
            let term: &[f64] = match t.checked_sub(delay) {
                Some(s) => &history[s][j],
                None => match pre {
                    PreHistory::InitialModel(x0) => x0,
                    PreHistory::Omit => continue,
                    PreHistory::Error => {
                        return Err(Error::Invalid(format!(
                            "node {i} needs node {j}'s update from round {} (before the history)",
                            t as i64 - delay as i64
                        )))
                    }
                },
            };
            if term.len() != dim {
                return Err(Error::Shape("update dimension mismatch".into()));
            }
            for (a, x) in acc.iter_mut().zip(term) {
                *a += x;
            }
            terms += 1;
        }
        for a in &mut acc {
            *a /= terms as f64;
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_delays_give_plain_mean() {
        let tau = vec![vec![0, 0], vec![0, 0]];
        let h = vec![vec![vec![1.0], vec![3.0]]];
        let x = delayed_average_oracle(&h, &tau, PreHistory::Error).unwrap();
        assert_eq!(x, vec![vec![2.0], vec![2.0]]);
    }

    #[test]
    fn constants_stay_constant() {
        let tau = vec![vec![0, 0, 1], vec![0, 0, 0], vec![1, 0, 0]];
        let h = vec![vec![vec![5.0]; 3]; 4];
        let x = delayed_average_oracle(&h, &tau, PreHistory::InitialModel(&[5.0])).unwrap();
        assert!(x.iter().all(|m| m[0] == 5.0));
    }

    #[test]
    fn missing_history_policies() {
        let tau = vec![vec![0, 0, 1], vec![0, 0, 0], vec![1, 0, 0]];
        let h = vec![vec![vec![1.0], vec![2.0], vec![3.0]]];
        assert!(delayed_average_oracle(&h, &tau, PreHistory::Error).is_err());
        let filled = delayed_average_oracle(&h, &tau, PreHistory::InitialModel(&[0.0])).unwrap();
        assert_eq!(filled[0], vec![1.0]);
        let omitted = delayed_average_oracle(&h, &tau, PreHistory::Omit).unwrap();
        assert_eq!(omitted[0], vec![1.5]);
        assert_eq!(omitted[1], vec![2.0]);
    }
}

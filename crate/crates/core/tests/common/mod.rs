#![allow(dead_code)]

use ttlab::dynamics::{TTSystem, Trial, XSource, YLine};
use ttlab::symbolic::{MarkovShift, Sided};

/// The `x` orbit of a trial, materialised up to index `len - 1`.
pub fn x_orbit(x: &MarkovShift, trial: &Trial, len: usize) -> Vec<u8> {
    XSource::new(x, &trial.start.x_prefix, trial.seeds.x).take_vec(len)
}

/// `h_n` for `n = 0..=x.len()`, summed term by term.
pub fn walk(values: &[i64], x: &[u8]) -> Vec<i64> {
    let mut out = vec![0];
    for &s in x {
        out.push(out.last().unwrap() + values[s as usize]);
    }
    out
}

/// Returns `1 ≤ n ≤ horizon` of the skew product to the trial's own ball,
/// found by comparing whole windows at every `n`.
pub fn naive_returns(system: &TTSystem, trial: &Trial, r: f64, horizon: u64) -> Vec<u64> {
    let (mx, my) = system.generations(r).unwrap();
    let sided = system.y().sided();
    let xw = trial.start.x_word(mx).unwrap().to_vec();
    let yw = trial.start.y_word(my, sided).unwrap().to_vec();
    let x = x_orbit(system.x(), trial, horizon as usize + mx + 1);
    let h = walk(system.cocycle().values(), &x);
    let mut line = YLine::new(system.y(), &trial.start, &trial.seeds).unwrap();
    let lo = match sided {
        Sided::OneSided => 0,
        Sided::TwoSided => -(my as i64),
    };
    let mut out = Vec::new();
    for n in 1..=horizon as usize {
        if x[n..=n + mx] != xw[..] {
            continue;
        }
        let window: Vec<u8> = (0..yw.len() as i64)
            .map(|i| line.get(h[n] + lo + i).unwrap())
            .collect();
        if window == yw {
            out.push(n as u64);
        }
    }
    out
}

/// Returns of the Z-extension to `B_r(x) × {0}` by direct comparison.
pub fn naive_z_returns(x_shift: &MarkovShift, values: &[i64], trial: &Trial, mx: usize, horizon: u64) -> Vec<u64> {
    let xw = trial.start.x_word(mx).unwrap().to_vec();
    let x = x_orbit(x_shift, trial, horizon as usize + mx + 1);
    let h = walk(values, &x);
    (1..=horizon as usize)
        .filter(|&n| h[n] == 0 && x[n..=n + mx] == xw[..])
        .map(|n| n as u64)
        .collect()
}

//! `theorem2`: tabulate the uniform-selection screening model over a
//! grid of dimensions and iteration counts, comparing the closed-form
//! expectation against Monte Carlo, and check its two limits.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use dp_screen::metrics::{expected_nonzeros_closed_form, mc_uniform_support};
use dp_screen::rng::RngStream;

#[derive(Args, Debug)]
pub struct Theorem2Args {
    /// Comma-separated dimension grid.
    #[arg(long = "d", default_value = "2,5,20")]
    pub d_grid: String,
    /// Comma-separated iteration grid.
    #[arg(long = "t", default_value = "1,10,100")]
    pub t_grid: String,
    /// Monte Carlo trials per grid point.
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_grid(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.trim().parse::<usize>().context("parsing grid value"))
        .collect()
}

pub fn run(args: Theorem2Args) -> Result<()> {
    let d_grid = parse_grid(&args.d_grid)?;
    let t_grid = parse_grid(&args.t_grid)?;
    fs::create_dir_all(&args.out)?;

    let mut grid = String::from("d,t,closed_form,mc_mean,mc_stderr,abs_diff\n");
    for (row, &d) in d_grid.iter().enumerate() {
        for (col, &t) in t_grid.iter().enumerate() {
            let cf = expected_nonzeros_closed_form(d, t);
            let mut rng = RngStream::new(args.seed, (row * t_grid.len() + col) as u64).rng();
            let (mean, stderr) = mc_uniform_support(d, t, args.trials, &mut rng);
            let _ = writeln!(grid, "{d},{t},{cf},{mean},{stderr},{}", (cf - mean).abs());
        }
    }
    fs::write(args.out.join("theorem2.csv"), &grid)?;

    // The two limit checks of the closed form.
    let mut limits = String::from("check,d,t,closed_form,limit,abs_err\n");
    let large_t = expected_nonzeros_closed_form(2, 1_000_000);
    let _ = writeln!(
        limits,
        "t_to_infinity,2,1000000,{large_t},{},{}",
        2.0 / 3.0,
        (large_t - 2.0 / 3.0).abs()
    );
    let large_d = expected_nonzeros_closed_form(1_000_000, 50);
    let _ = writeln!(
        limits,
        "d_to_infinity,1000000,50,{large_d},49,{}",
        (large_d - 49.0).abs()
    );
    fs::write(args.out.join("theorem2_limits.csv"), &limits)?;

    print!("{grid}");
    print!("{limits}");
    Ok(())
}

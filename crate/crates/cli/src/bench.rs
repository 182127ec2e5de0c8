//! Primitive-operation benchmarks and noise-growth measurements.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use hesim::ckks::{CkksCiphertext, CkksContext, CkksParams, InsecureRefresher, RefreshPolicy};
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::mix_seed;
use crate::error::{CliError, CliResult};

/// Length of the benchmark vector.
pub const BENCH_LEN: usize = 64;

/// Scalar operand of the `*_cs` operations.
pub fn bench_scalar() -> f64 {
    1.0 + PI / 30.0
}

/// `sin(2πi/L)` for `i = 0..L`.
pub fn bench_data(len: usize) -> Vec<f64> {
    (0..len).map(|i| (TAU * i as f64 / len as f64).sin()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchOp {
    Encode,
    EncryptDecrypt,
    AddCc,
    AddCp,
    AddCs,
    MulCc,
    MulCp,
    MulCs,
    Rotate(i64),
    Refresh,
}

impl BenchOp {
    pub fn all() -> Vec<BenchOp> {
        use BenchOp::*;
        vec![
            Encode,
            EncryptDecrypt,
            AddCc,
            AddCp,
            AddCs,
            MulCc,
            MulCp,
            MulCs,
            Rotate(-1),
            Rotate(5),
            Rotate(-25),
            Refresh,
        ]
    }

    fn salt(&self) -> u64 {
        // FNV-1a of the name keeps per-op streams independent of the op list
        self.to_string()
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
    }
}

impl fmt::Display for BenchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use BenchOp::*;
        match self {
            Encode => f.write_str("encode"),
            EncryptDecrypt => f.write_str("encrypt_decrypt"),
            AddCc => f.write_str("add_cc"),
            AddCp => f.write_str("add_cp"),
            AddCs => f.write_str("add_cs"),
            MulCc => f.write_str("mul_cc"),
            MulCp => f.write_str("mul_cp"),
            MulCs => f.write_str("mul_cs"),
            Rotate(k) => write!(f, "rotate:{k}"),
            Refresh => f.write_str("refresh"),
        }
    }
}

impl FromStr for BenchOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        use BenchOp::*;
        let t = s.trim().to_ascii_lowercase();
        if let Some(k) = t
            .strip_prefix("rotate:")
            .or_else(|| t.strip_prefix("rotate(").and_then(|r| r.strip_suffix(')')))
        {
            return k
                .trim()
                .parse()
                .map(Rotate)
                .map_err(|_| format!("bad rotation index in {s:?}"));
        }
        Ok(match t.as_str() {
            "encode" => Encode,
            "encrypt_decrypt" => EncryptDecrypt,
            "add_cc" => AddCc,
            "add_cp" => AddCp,
            "add_cs" => AddCs,
            "mul_cc" => MulCc,
            "mul_cp" => MulCp,
            "mul_cs" => MulCs,
            "refresh" => Refresh,
            _ => return Err(format!("unknown benchmark op {s:?}")),
        })
    }
}

/// Whether the second ciphertext operand shares the first one's noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    /// The same ciphertext is used for both operands.
    Correlated,
    /// The second operand is an independent encryption.
    Uncorrelated,
}

impl FromStr for Correlation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "correlated" => Ok(Correlation::Correlated),
            "uncorrelated" => Ok(Correlation::Uncorrelated),
            _ => Err(format!("unknown correlation mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    #[serde(with = "op_names")]
    pub ops: Vec<BenchOp>,
    /// `l_max` values; one context per entry.
    pub depths: Vec<usize>,
    pub reps: usize,
    pub correlation: Correlation,
    pub ring_dim: usize,
    pub scale_bits: u32,
    /// Capped at each depth.
    pub l_refresh: usize,
    pub eps_boot: f64,
    pub seed: u64,
}

mod op_names {
    use super::BenchOp;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ops: &[BenchOp], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(ops.iter().map(|o| o.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BenchOp>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

impl Default for BenchSpec {
    fn default() -> Self {
        let p = CkksParams::default();
        Self {
            ops: BenchOp::all(),
            depths: vec![5, 10, 15, 20, 25, 33],
            reps: 5,
            correlation: Correlation::Uncorrelated,
            ring_dim: p.ring_dim,
            scale_bits: p.scale_bits,
            l_refresh: p.l_refresh,
            eps_boot: RefreshPolicy::standard().eps_boot,
            seed: 1,
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.reps < 5 {
            return Err(CliError::Config(format!(
                "repetitions must be at least 5, got {}",
                self.reps
            )));
        }
        if self.ops.is_empty() || self.depths.is_empty() {
            return Err(CliError::Config("need at least one op and one depth".into()));
        }
        if self.depths.contains(&0) || self.l_refresh == 0 {
            return Err(CliError::Config("depths and l_refresh must be positive".into()));
        }
        if self.ring_dim / 2 < BENCH_LEN {
            return Err(CliError::Config(format!("ring dimension {} too small", self.ring_dim)));
        }
        Ok(())
    }

    fn params(&self, depth: usize) -> CkksParams {
        CkksParams {
            ring_dim: self.ring_dim,
            l_max: depth,
            l_refresh: self.l_refresh.min(depth),
            scale_bits: self.scale_bits,
            batch_size: BENCH_LEN,
            dnum: CkksParams::default().dnum.min(depth + 1),
            ..CkksParams::default()
        }
    }
}

/// One timed sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub op: String,
    pub l_max: usize,
    pub rep: usize,
    /// L∞ distance to the plaintext result.
    pub error: f64,
    pub seconds: f64,
    /// Input level minus output level.
    pub levels: i64,
}

/// Per-(op, depth) aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub op: String,
    pub l_max: usize,
    pub median_error: f64,
    pub median_seconds: f64,
    pub mean_seconds: f64,
    pub levels: i64,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.iter().copied().filter(|x| !x.is_nan()).collect();
    if s.is_empty() {
        return f64::NAN;
    }
    s.sort_by(|a, b| a.total_cmp(b));
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

pub fn summarize(records: &[BenchRecord]) -> Vec<ReportRow> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(o, l)| *o == r.op && *l == r.l_max) {
            keys.push((r.op.clone(), r.l_max));
        }
    }
    keys.into_iter()
        .map(|(op, l_max)| {
            let cell: Vec<&BenchRecord> = records.iter().filter(|r| r.op == op && r.l_max == l_max).collect();
            let errs: Vec<f64> = cell.iter().map(|r| r.error).collect();
            let secs: Vec<f64> = cell.iter().map(|r| r.seconds).collect();
            ReportRow {
                op,
                l_max,
                median_error: median(&errs),
                median_seconds: median(&secs),
                mean_seconds: secs.iter().sum::<f64>() / secs.len() as f64,
                levels: cell[0].levels,
            }
        })
        .collect()
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Keys {
    ctx: CkksContext,
    sk: hesim::ckks::SecretKey,
    pk: hesim::ckks::PublicKey,
    rlk: hesim::ckks::RelinKey,
    rot: hesim::ckks::RotKeySet,
    refresher: Option<InsecureRefresher>,
}

impl Keys {
    fn new(spec: &BenchSpec, depth: usize) -> CliResult<Self> {
        let ctx = CkksContext::new(spec.params(depth))?;
        let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(spec.seed, depth as u64));
        let (sk, pk, rlk) = ctx.keygen(&mut rng);
        let shifts: Vec<i64> = spec
            .ops
            .iter()
            .filter_map(|o| match o {
                BenchOp::Rotate(k) => Some(*k),
                _ => None,
            })
            .collect();
        let rot = ctx.rotation_keygen(&sk, &shifts, &mut rng);
        let refresher = if spec.ops.contains(&BenchOp::Refresh) {
            let policy = RefreshPolicy::standard().with_eps(spec.eps_boot);
            Some(InsecureRefresher::new(&ctx, sk.clone(), pk.clone(), policy, mix_seed(spec.seed, 0xb007))?)
        } else {
            None
        };
        Ok(Self {
            ctx,
            sk,
            pk,
            rlk,
            rot,
            refresher,
        })
    }

    fn encrypt(&self, x: &[f64], rng: &mut ChaCha20Rng) -> CliResult<CkksCiphertext> {
        Ok(self.ctx.encrypt_values(x, self.ctx.l_max(), &self.pk, rng)?)
    }

    fn decrypt(&self, ct: &CkksCiphertext) -> CliResult<Vec<f64>> {
        Ok(self.ctx.decrypt_values(ct, &self.sk)?)
    }
}

fn sample(keys: &Keys, op: BenchOp, corr: Correlation, rng: &mut ChaCha20Rng) -> CliResult<(f64, f64, i64)> {
    use BenchOp::*;
    let ctx = &keys.ctx;
    let x = bench_data(BENCH_LEN);
    let s = bench_scalar();
    let top = ctx.l_max();
    let timed = |f: &mut dyn FnMut() -> CliResult<CkksCiphertext>| -> CliResult<(CkksCiphertext, f64)> {
        let t = Instant::now();
        let out = f()?;
        Ok((out, t.elapsed().as_secs_f64()))
    };

    if op == Encode {
        let t = Instant::now();
        let pt = ctx.encode(&x, top)?;
        let secs = t.elapsed().as_secs_f64();
        let back = ctx.decode(&pt)?;
        return Ok((linf(&back, &x), secs, 0));
    }
    if op == EncryptDecrypt {
        let pt = ctx.encode(&x, top)?;
        let t = Instant::now();
        let ct = ctx.encrypt(&pt, &keys.pk, rng)?;
        let back = keys.decrypt(&ct)?;
        let secs = t.elapsed().as_secs_f64();
        return Ok((linf(&back, &x), secs, 0));
    }

    let a = keys.encrypt(&x, rng)?;
    let second = |rng: &mut ChaCha20Rng| -> CliResult<CkksCiphertext> {
        match corr {
            Correlation::Correlated => Ok(a.clone()),
            Correlation::Uncorrelated => keys.encrypt(&x, rng),
        }
    };
    let (out, secs, expect): (CkksCiphertext, f64, Vec<f64>) = match op {
        AddCc => {
            let b = second(rng)?;
            let (o, t) = timed(&mut || Ok(ctx.add(&a, &b)?))?;
            (o, t, x.iter().map(|v| 2.0 * v).collect())
        }
        AddCp => {
            let pt = ctx.encode_at_scale(&x, top, a.scale())?;
            let (o, t) = timed(&mut || Ok(ctx.add_plain(&a, &pt)?))?;
            (o, t, x.iter().map(|v| 2.0 * v).collect())
        }
        AddCs => {
            let (o, t) = timed(&mut || Ok(ctx.add_scalar(&a, s)?))?;
            (o, t, x.iter().map(|v| v + s).collect())
        }
        MulCc => {
            let b = second(rng)?;
            let (o, t) = timed(&mut || Ok(ctx.mul(&a, &b, &keys.rlk)?))?;
            (o, t, x.iter().map(|v| v * v).collect())
        }
        MulCp => {
            let pt = ctx.encode_multiplier(&x, top)?;
            let (o, t) = timed(&mut || Ok(ctx.mul_plain(&a, &pt)?))?;
            (o, t, x.iter().map(|v| v * v).collect())
        }
        MulCs => {
            let (o, t) = timed(&mut || Ok(ctx.mul_scalar(&a, s)?))?;
            (o, t, x.iter().map(|v| v * s).collect())
        }
        Rotate(k) => {
            let (o, t) = timed(&mut || Ok(ctx.rotate(&a, k, &keys.rot)?))?;
            let n = BENCH_LEN as i64;
            (o, t, (0..n).map(|i| x[(i + k).rem_euclid(n) as usize]).collect())
        }
        Refresh => {
            let r = keys.refresher.as_ref().ok_or(hesim::Error::RefreshDisabled)?;
            let (o, t) = timed(&mut || Ok(r.refresh(ctx, &a)?))?;
            (o, t, x.clone())
        }
        Encode | EncryptDecrypt => unreachable!("handled above"),
    };
    let back = keys.decrypt(&out)?;
    Ok((linf(&back, &expect), secs, a.level() as i64 - out.level() as i64))
}

/// Runs every (op, depth, rep) cell. Depths run in parallel; the cells of
/// one depth run sequentially. Records are ordered by depth, op, rep.
pub fn run_bench(spec: &BenchSpec) -> CliResult<Vec<BenchRecord>> {
    spec.validate()?;
    let per_depth: Vec<Vec<BenchRecord>> = spec
        .depths
        .par_iter()
        .map(|&depth| -> CliResult<Vec<BenchRecord>> {
            let keys = Keys::new(spec, depth)?;
            let mut out = Vec::with_capacity(spec.ops.len() * spec.reps);
            for &op in &spec.ops {
                for rep in 0..spec.reps {
                    let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(
                        spec.seed ^ op.salt(),
                        (depth * 100_003 + rep) as u64,
                    ));
                    let (error, seconds, levels) = sample(&keys, op, spec.correlation, &mut rng)?;
                    out.push(BenchRecord {
                        op: op.to_string(),
                        l_max: depth,
                        rep,
                        error,
                        seconds,
                        levels,
                    });
                }
            }
            Ok(out)
        })
        .collect::<CliResult<_>>()?;
    Ok(per_depth.into_iter().flatten().collect())
}

/// L∞ error of a running sum of `n = 2..=n_max` ciphertexts of the
/// benchmark vector, against `n·x`. Correlated sums add the same
/// ciphertext; uncorrelated ones add fresh encryptions.
pub fn noise_growth(spec: &BenchSpec, depth: usize, corr: Correlation, n_max: usize) -> CliResult<Vec<(usize, f64)>> {
    if n_max < 2 {
        return Err(CliError::Config("noise growth needs n_max >= 2".into()));
    }
    let keys = Keys::new(spec, depth)?;
    let x = bench_data(BENCH_LEN);
    let salt = match corr {
        Correlation::Correlated => 0x00c0,
        Correlation::Uncorrelated => 0x0dd,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(spec.seed, salt));
    let first = keys.encrypt(&x, &mut rng)?;
    let mut acc = first.clone();
    let mut out = Vec::with_capacity(n_max - 1);
    for n in 2..=n_max {
        let term = match corr {
            Correlation::Correlated => first.clone(),
            Correlation::Uncorrelated => keys.encrypt(&x, &mut rng)?,
        };
        acc = keys.ctx.add(&acc, &term)?;
        let expect: Vec<f64> = x.iter().map(|v| n as f64 * v).collect();
        out.push((n, linf(&keys.decrypt(&acc)?, &expect)));
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(usize, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|&(x, y)| ((x as f64).ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

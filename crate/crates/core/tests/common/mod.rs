#![allow(dead_code)]

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use promptad_core::client::{ClientError, DetectionRecord, Outcome, Usage, Verdict};
use promptad_core::eval::{Detector, ScoredSample};
use promptad_core::prompt::ComposedPrompt;
use promptad_core::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn crimp_eval_csv() -> PathBuf {
    workspace().join("data/crimp-synthetic/eval.csv")
}

pub fn crimp_pool_csv() -> PathBuf {
    workspace().join("data/crimp-synthetic/train_pool.csv")
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_curve(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let scale = rng.random_range(0.1..100.0);
    (0..500).map(|_| rng.random_range(-1.0..1.0) * scale).collect()
}

/// Slope from the textbook normal equations on raw sums, over x = a..=b.
pub fn ols_oracle(values: &[f64], a: usize, b: usize) -> f64 {
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &y) in values.iter().enumerate().take(b + 1).skip(a) {
        let x = i as f64;
        n += 1.0;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Sum of per-interval trapezoids.
pub fn trapezoid_oracle(values: &[f64], a: usize, b: usize) -> f64 {
    let mut s = 0.0;
    for i in a..b {
        s += (values[i] + values[i + 1]) / 2.0;
    }
    s
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Detector that answers the ground truth it is given by sample id.
pub struct LabelOracle(pub HashMap<String, Label>);

impl Detector for LabelOracle {
    fn detect(&self, _prompt: &ComposedPrompt, sample_id: &str) -> Result<DetectionRecord, ClientError> {
        let label = self.0[sample_id];
        Ok(DetectionRecord {
            sample_id: sample_id.to_string(),
            outcome: Outcome::Verdict(Verdict {
                classification: label,
                reasoning: "oracle".into(),
            }),
            usage: Usage {
                input_tokens: 10,
                output_tokens: 2,
            },
            latency_ms: 0,
            cache_hit: false,
            retried: false,
        })
    }
}

/// One published ablation row: printed precision / recall / F1 in percent.
pub struct TableRow {
    pub name: &'static str,
    pub positives: u64,
    pub negatives: u64,
    pub printed: [f64; 3],
}

/// Rows whose class counts are known (58 good + 92 anomalous cable images,
/// 50 normal + 100 anomalous crimp curves).
pub const TABLE_ROWS: [TableRow; 9] = [
    TableRow { name: "cable zero-shot Ti,Oi", positives: 92, negatives: 58, printed: [97.1, 73.9, 84.0] },
    TableRow { name: "cable zero-shot Ti,Oi,Ci", positives: 92, negatives: 58, printed: [97.5, 83.7, 90.1] },
    TableRow { name: "cable zero-shot Ti,Oi,Ci,Ei", positives: 92, negatives: 58, printed: [98.8, 88.0, 93.1] },
    TableRow { name: "cable one-shot Ti,Oi", positives: 92, negatives: 58, printed: [95.4, 89.1, 92.1] },
    TableRow { name: "cable one-shot Ti,Oi,Ci", positives: 92, negatives: 58, printed: [95.6, 93.5, 94.5] },
    TableRow { name: "cable one-shot Ti,Oi,Ci,Ei", positives: 92, negatives: 58, printed: [95.7, 95.7, 95.7] },
    TableRow { name: "crimp few-shot Ti,Oi", positives: 100, negatives: 50, printed: [100.0, 76.0, 86.4] },
    TableRow { name: "crimp few-shot Ti,Oi,Ci", positives: 100, negatives: 50, printed: [100.0, 82.0, 90.1] },
    TableRow { name: "crimp few-shot Ti,Oi,Ci,Ei", positives: 100, negatives: 50, printed: [100.0, 92.0, 95.8] },
];

/// Every (tp, fp) over the class counts whose exact P/R/F1 all lie within
/// `tol` percentage points of the printed values.
pub fn matching_matrices(row: &TableRow, tol: f64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for tp in 0..=row.positives {
        for fp in 0..=row.negatives {
            if tp + fp == 0 {
                continue;
            }
            let p = 100.0 * tp as f64 / (tp + fp) as f64;
            let r = 100.0 * tp as f64 / row.positives as f64;
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            if (p - row.printed[0]).abs() <= tol && (r - row.printed[1]).abs() <= tol && (f - row.printed[2]).abs() <= tol
            {
                out.push((tp, fp));
            }
        }
    }
    out
}

/// Holdout oracle: O(n^2) scan over `-inf` and every validation score.
pub fn brute_best_threshold(val: &[&ScoredSample]) -> f64 {
    let mut candidates: Vec<f64> = val.iter().map(|s| s.score).collect();
    candidates.push(f64::NEG_INFINITY);
    candidates.sort_by(f64::total_cmp);
    let mut best_t = f64::NEG_INFINITY;
    let mut best = (0u64, 1u64);
    let mut first = true;
    for &t in &candidates {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for s in val {
            let pred = s.score > t;
            match (s.label.is_anomalous(), pred) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        let num = 2 * tp;
        let den = (2 * tp + fp + fn_).max(1);
        if first || (num as u128) * (best.1 as u128) > (best.0 as u128) * (den as u128) {
            best = (num, den);
            best_t = t;
            first = false;
        }
    }
    best_t
}

/// Writes a tiny placeholder image file; its bytes never get decoded.
pub fn touch_image(path: &Path) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, b"\x89PNG\r\n\x1a\nplaceholder").unwrap();
}

/// Test-split class sizes of the MVTec cable category.
pub const CABLE_TEST: [(&str, usize); 9] = [
    ("good", 58),
    ("bent_wire", 13),
    ("cable_swap", 12),
    ("combined", 11),
    ("cut_inner_insulation", 14),
    ("cut_outer_insulation", 10),
    ("missing_cable", 12),
    ("missing_wire", 10),
    ("poke_insulation", 10),
];

/// MVTec-style tree under `root/cable`.
pub fn mvtec_tree(root: &Path, train_good: usize, test: &[(&str, usize)]) {
    for i in 0..train_good {
        touch_image(&root.join(format!("cable/train/good/{i:03}.png")));
    }
    for (class, n) in test {
        for i in 0..*n {
            touch_image(&root.join(format!("cable/test/{class}/{i:03}.png")));
        }
    }
}

pub fn wire_tree(root: &Path, per_class: usize) {
    for class in ["good", "pulled_strands", "cut_strands"] {
        for i in 0..per_class {
            touch_image(&root.join(format!("{class}/{i:03}.png")));
        }
    }
}

pub fn report(name: &str, pass: bool, detail: &str) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

/// One dataset per scenario: synthetic cable and wire trees under `tmp`
/// plus the bundled crimp curves.
pub fn scenario_datasets(tmp: &Path) -> Vec<promptad_core::dataset::Dataset> {
    use promptad_core::dataset::load;
    use promptad_core::prompt::Scenario;
    mvtec_tree(tmp, 224, &CABLE_TEST);
    wire_tree(&tmp.join("wire"), 10);
    vec![
        load(Scenario::Cable, &tmp.join("cable")).unwrap(),
        load(Scenario::StrippedWire, &tmp.join("wire")).unwrap(),
        load(Scenario::CrimpFeatures, &crimp_eval_csv()).unwrap(),
    ]
}

pub fn truth_oracle(samples: &[promptad_core::eval::EvalSample]) -> LabelOracle {
    LabelOracle(samples.iter().map(|s| (s.id.clone(), s.label)).collect())
}

pub fn replay_cache() -> PathBuf {
    fixtures().join("replay/crimp")
}

/// Replay client over the committed crimp response cache.
pub fn replay_client() -> promptad_core::client::Client {
    use promptad_core::client::{Client, ModelConfig};
    Client::new(ModelConfig::replay(ModelConfig::default().model_id, replay_cache())).unwrap()
}

/// Every file under `dir`, relative path to bytes.
pub fn tree_bytes(dir: &Path) -> std::collections::BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut std::collections::BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Offline crimp ablation into `runs_root` under a fixed run id.
pub fn replay_crimp_run(runs_root: &Path) -> promptad_core::experiment::RunOutput {
    use promptad_core::experiment::{run_ablation_to_dir, RunSpec};
    use promptad_core::prompt::{load_preset, Scenario};
    let client = replay_client();
    let spec = RunSpec {
        scenario: Scenario::CrimpFeatures,
        data_root: crimp_eval_csv(),
        configs: Vec::new(),
        reference_ids: None,
    };
    run_ablation_to_dir(
        &spec,
        &load_preset(Scenario::CrimpFeatures),
        client.config(),
        &client,
        runs_root,
        Some("replay"),
        promptad_core::Execution::default(),
        None,
    )
    .unwrap()
}

//! End-to-end acceptance run: one PASS/FAIL line per criterion, non-zero exit
//! if any fails. Runs as a plain binary so the report is always printed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use samlab::autodiff::{Array, Tape, Var};
use samlab::data::{gen_digit_images, gen_gaussian_task, load_char_corpus, shift_images, Dataset, GaussianTask, ImageShift, Split};
use samlab::grouping::{Granularity, GroupPartition};
use samlab::landscape::{corruption_attack, fisher_spectrum, AttackConfig, SpectrumConfig};
use samlab::model::{build_mlp, evaluate, loss_and_grad, Activation, Counted, MlpModel, Model, RnnLmModel};
use samlab::params::ParamVector;
use samlab::sam::{
    ascent_step_raw, project_raw, scaled_norm, single_step_objective, train, Implementation, NormOrder,
    OptimizerConfig, SamConfig, TrainOptions,
};
use samlab::shift::{
    alpha_grid, default_grid, delta_bound, delta_first_order, exact_minimizer, fine_tune, interpolation_curve, pearson,
    random_problem, run_quadratic_trials, run_shift_trials, FDivergenceSpec, FinetuneConfig, NeuralSurface,
    QuadraticShiftProblem,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- 1

type Builder = fn(&mut Tape<f64>, &[Var]) -> Var;

/// Scalar `Σ wᵢ outᵢ` with fixed weights, and its gradient w.r.t. each input.
fn reduced(build: Builder, inputs: &[Array<f64>]) -> (f64, Vec<Array<f64>>) {
    let mut t = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|a| t.param(a.clone())).collect();
    let out = build(&mut t, &vars);
    t.forward(&[]).unwrap();
    let shape = t.value(out).unwrap().shape().to_vec();
    let n: usize = shape.iter().product();
    let w = t.constant(Array::new(shape, (0..n).map(|i| (i as f64 * 1.3 + 0.7).cos()).collect()).unwrap());
    let prod = t.mul(out, w);
    t.sum(prod);
    let y = t.forward(&[]).unwrap().item().unwrap();
    let g = t.backward().unwrap();
    (y, vars.iter().zip(inputs).map(|(&v, a)| g.get_or_zeros(v, a.shape())).collect())
}

fn criterion_autodiff() -> Outcome {
    let cases: Vec<(&str, Builder, Vec<Vec<usize>>)> = vec![
        ("add", |t, v| t.add(v[0], v[1]), vec![vec![2, 3], vec![2, 3]]),
        ("add_bias", |t, v| t.add(v[0], v[1]), vec![vec![2, 3], vec![3]]),
        ("sub", |t, v| t.sub(v[0], v[1]), vec![vec![3], vec![3]]),
        ("mul", |t, v| t.mul(v[0], v[1]), vec![vec![2, 2], vec![2, 2]]),
        ("scale", |t, v| t.scale(v[0], 0.37), vec![vec![4]]),
        ("matmul", |t, v| t.matmul(v[0], v[1]), vec![vec![3, 2], vec![2, 4]]),
        ("matvec", |t, v| t.matmul(v[0], v[1]), vec![vec![3, 2], vec![2]]),
        ("transpose", |t, v| t.transpose(v[0]), vec![vec![2, 3]]),
        ("relu", |t, v| t.relu(v[0]), vec![vec![6]]),
        ("sigmoid", |t, v| t.sigmoid(v[0]), vec![vec![6]]),
        ("tanh", |t, v| t.tanh(v[0]), vec![vec![6]]),
        ("softmax_cross_entropy", |t, v| t.softmax_cross_entropy(v[0], vec![1, 3]), vec![vec![2, 4]]),
        ("mean_rows", |t, v| t.mean_rows(v[0]), vec![vec![4, 3]]),
        ("sum", |t, v| t.sum(v[0]), vec![vec![2, 3]]),
        ("embedding", |t, v| t.embedding(v[0], vec![0, 2, 2]), vec![vec![3, 2]]),
        ("concat", |t, v| t.concat(v[0], v[1]), vec![vec![2, 2], vec![2, 3]]),
    ];
    let mut r = rng(1);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (name, build, shapes) in &cases {
        for _ in 0..100 {
            let inputs: Vec<Array<f64>> = shapes
                .iter()
                .map(|s| {
                    let n = s.iter().product();
                    let data = (0..n)
                        .map(|_| loop {
                            let x: f64 = r.gen_range(-2.0..2.0);
                            if x.abs() > 1e-3 {
                                break x;
                            }
                        })
                        .collect();
                    Array::new(s.clone(), data).unwrap()
                })
                .collect();
            let (_, grads) = reduced(*build, &inputs);
            for (k, input) in inputs.iter().enumerate() {
                for i in 0..input.len() {
                    let bump = |d: f64| {
                        let mut x = inputs.clone();
                        x[k].data_mut()[i] += d;
                        reduced(*build, &x).0
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    let an = grads[k].data()[i];
                    let err = (fd - an).abs();
                    let rel = err / fd.abs().max(an.abs()).max(1e-6);
                    worst = worst.max(rel);
                    if rel >= 1e-5 && err >= 1e-9 {
                        return Err(format!("{name}: input {k}[{i}] analytic {an:e} vs fd {fd:e}"));
                    }
                }
            }
        }
    }
    Ok(format!("{} primitives x 100 points, worst rel err {worst:.2e}", cases.len()))
}

// ---------------------------------------------------------------- 2

fn criterion_ascent() -> Outcome {
    let mut r = rng(2);
    for p in [NormOrder::L2, NormOrder::LInf] {
        for trial in 0..1000 {
            let n = r.gen_range(1..12);
            let g: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
            let t: Vec<f64> = (0..n).map(|_| r.gen_range(0.05..4.0)).collect();
            let eta = r.gen_range(1e-3..2.0);
            let u = ascent_step_raw(&g, &t, eta, p);
            let value: f64 = u.iter().zip(&g).map(|(a, b)| a * b).sum();
            // closed-form optimum: η‖Tg‖₂ (p = 2) or η‖Tg‖₁ (p = ∞)
            let tg = g.iter().zip(&t).map(|(a, b)| a * b);
            let optimum = eta * match p {
                NormOrder::L2 => tg.map(|v| v * v).sum::<f64>().sqrt(),
                NormOrder::LInf => tg.map(f64::abs).sum::<f64>(),
            };
            if (value - optimum).abs() > 1e-9 * optimum.max(1.0) || scaled_norm(&u, &t, p) > eta * (1.0 + 1e-12) {
                return Err(format!("{} trial {trial}: value {value} vs optimum {optimum}", p.name()));
            }
            for _ in 0..1000 {
                let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
                let shrink = eta * r.gen_range(0.0..=1.0f64).sqrt() / scaled_norm(&x, &vec![1.0; n], p);
                let cand: f64 = x.iter().zip(&t).zip(&g).map(|((xi, ti), gi)| xi * shrink * ti * gi).sum();
                if cand > value + 1e-12 * value.abs().max(1.0) {
                    return Err(format!("{} trial {trial}: candidate {cand} beats {value}", p.name()));
                }
            }
        }
    }
    Ok("2 norms x 1000 triples x 1000 candidates".into())
}

// ---------------------------------------------------------------- 3

fn criterion_projection() -> Outcome {
    let mut r = rng(3);
    let mut interior = 0;
    for p in [NormOrder::L2, NormOrder::LInf] {
        for i in 0..10_000 {
            let n = r.gen_range(1..10);
            let t: Vec<f64> = (0..n).map(|_| r.gen_range(0.05..4.0)).collect();
            let eps = r.gen_range(1e-3..2.0);
            let spread = r.gen_range(0.1..5.0);
            let v: Vec<f64> = (0..n).map(|_| r.gen_range(-spread..spread)).collect();
            let a = project_raw(&v, &t, eps, p);
            let c = scaled_norm(&a, &t, p);
            if c > eps + 1e-9 {
                return Err(format!("{} #{i}: constraint {c} > {eps}", p.name()));
            }
            let twice = project_raw(&a, &t, eps, p);
            if twice.iter().zip(&a).any(|(x, y)| (x - y).abs() > 1e-9) {
                return Err(format!("{} #{i}: projection not idempotent", p.name()));
            }
            if scaled_norm(&v, &t, p) <= eps {
                interior += 1;
                if a.iter().zip(&v).any(|(x, y)| (x - y).abs() > 1e-9) {
                    return Err(format!("{} #{i}: interior point moved", p.name()));
                }
            }
        }
    }
    check(interior > 100, format!("2 norms x 10000 vectors ({interior} interior)"))
}

// ---------------------------------------------------------------- 4

fn toy_set(seed: u64, n: usize) -> Dataset {
    let mut r = rng(seed);
    let mut f = Vec::new();
    let mut l = Vec::new();
    for i in 0..n {
        let y = i % 3;
        for d in 0..5 {
            f.push(if d == y { 1.0 } else { 0.0 } + r.gen_range(-1.0..1.0));
        }
        l.push(y);
    }
    Dataset::classification(Split::Train, 5, 3, f, l).unwrap()
}

fn criterion_cost() -> Outcome {
    let data = toy_set(4, 50);
    let opts = TrainOptions { epochs: 2, batch_size: 8, seed: 0, eval_chunk: 64 };
    let batches = 50usize.div_ceil(8);
    let run = |cfg: &SamConfig<f64>| {
        let model = Counted::new(MlpModel::new(&[5, 7, 3], Activation::Relu).unwrap());
        let init = model.init_params(1);
        let (_, m) = train(&model, init, &data, None, &OptimizerConfig::sgd(0.05), cfg, &opts, |_| Ok(())).unwrap();
        (m, model.passes())
    };
    let mut seen = Vec::new();
    for k in 1..=5 {
        let (m, counted) = run(&SamConfig::ga_sam(k, 0.05, NormOrder::L2));
        let expect = (k + 1) * batches;
        if m.epochs.iter().any(|e| e.passes != expect) || counted != 2 * expect {
            return Err(format!("K={k}: epochs {:?}, counter {counted}, expected {expect}/epoch", m.epochs.iter().map(|e| e.passes).collect::<Vec<_>>()));
        }
        seen.push(expect);
    }
    let (m, counted) = run(&SamConfig::vanilla(0.05, NormOrder::L2));
    check(
        m.epochs.iter().all(|e| e.passes == 2 * batches) && counted == 4 * batches,
        format!("K=1..5 passes/epoch {seen:?} over {batches} batches; single-step {}", m.epochs[0].passes),
    )
}

// ---------------------------------------------------------------- 5, 6

/// Independent minimizer of `Σ wᵢ ½(θ−cᵢ)ᵀAᵢ(θ−cᵢ)` by LU solve.
fn oracle_minimizer(problem: &QuadraticShiftProblem, weights: &[f64]) -> DVector<f64> {
    let d = problem.dim();
    let mut h = DMatrix::zeros(d, d);
    let mut b = DVector::zeros(d);
    for (inst, &w) in problem.instances().iter().zip(weights) {
        h += &inst.curvature * w;
        b += &inst.curvature * &inst.center * w;
    }
    h.lu().solve(&b).expect("nonsingular")
}

fn oracle_delta(problem: &QuadraticShiftProblem) -> DVector<f64> {
    oracle_minimizer(problem, problem.shifted()) - oracle_minimizer(problem, problem.base())
}

fn criterion_delta() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let p = random_problem(12, 5, 0.5, true, seed).map_err(|e| e.to_string())?;
        worst = worst.max((delta_first_order(&p).unwrap() - oracle_delta(&p)).norm());
    }
    if worst >= 1e-10 {
        return Err(format!("shared curvature: error {worst:e}"));
    }
    let mut min_factor = f64::INFINITY;
    for seed in 0..20 {
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&s| {
                let p = random_problem(12, 5, s, false, 100 + seed).unwrap();
                (delta_first_order(&p).unwrap() - oracle_delta(&p)).norm()
            })
            .collect();
        for w in errs.windows(2) {
            min_factor = min_factor.min(w[0] / w[1]);
        }
    }
    check(min_factor >= 3.0, format!("shared error {worst:.1e}; heterogeneous halving factor >= {min_factor:.2}"))
}

fn criterion_bound() -> Outcome {
    let kl = FDivergenceSpec::kl();
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for seed in 0..100 {
        let p = random_problem(10, 4, 0.02, false, 5000 + seed).map_err(|e| e.to_string())?;
        let bound = delta_bound(&p, &kl).map_err(|e| e.to_string())?;
        let actual = oracle_delta(&p).norm();
        tightest = tightest.max(actual / bound);
        if actual > 1.05 * bound {
            violations += 1;
        }
    }
    check(violations == 0, format!("{violations} violations in 100 problems; max |delta|/bound {tightest:.3}"))
}

// ---------------------------------------------------------------- 7, 8

struct DigitsRun {
    model: MlpModel,
    train_set: Dataset,
    shifted: Dataset,
    theta: ParamVector<f64>,
}

fn digits_run() -> DigitsRun {
    let train_set = gen_digit_images(2000, Split::Train, 7).unwrap();
    let fresh = gen_digit_images(2000, Split::Test, 8).unwrap();
    let shifted = shift_images(&fresh, &ImageShift::default(), Split::Test).unwrap();
    let model = MlpModel::new(&[784, 100, 100, 10], Activation::Relu).unwrap();
    let init = Model::<f64>::init_params(&model, 1);
    let opts = TrainOptions { epochs: 5, batch_size: 64, seed: 1, eval_chunk: 512 };
    let (theta, _) =
        train(&model, init, &train_set, None, &OptimizerConfig::sgd(0.1), &SamConfig::disabled(), &opts, |_| Ok(()))
            .unwrap();
    DigitsRun { model, train_set, shifted, theta }
}

fn criterion_linear_shift(digits: &DigitsRun) -> Outcome {
    let mut worst_ratio = 0.0f64;
    let mut worst_r2 = 1.0f64;
    for seed in 0..5 {
        let p = random_problem(20, 5, 0.5, true, 300 + seed).map_err(|e| e.to_string())?;
        let report = run_quadratic_trials(&p, &default_grid(100)).map_err(|e| e.to_string())?;
        let ratio = report.fit.slope / oracle_delta(&p).norm();
        worst_ratio = worst_ratio.max((ratio - 1.0).abs());
        worst_r2 = worst_r2.min(report.fit.r_squared);
    }
    if worst_ratio > 1e-6 || worst_r2 < 1.0 - 1e-9 {
        return Err(format!("quadratic: |ratio-1| {worst_ratio:e}, R^2 {worst_r2}"));
    }
    let report = run_shift_trials(
        &digits.model,
        &digits.theta,
        &digits.train_set,
        &digits.shifted,
        &default_grid(20),
        &FinetuneConfig::default(),
        7,
    )
    .map_err(|e| e.to_string())?;
    check(
        report.fit.r_squared >= 0.9 && report.failed == 0,
        format!(
            "quadratic |ratio-1| {worst_ratio:.1e}, R^2 >= {worst_r2:.12}; MLP R^2 {:.4} over {} trials",
            report.fit.r_squared,
            report.records.len()
        ),
    )
}

fn criterion_interpolation(digits: &DigitsRun) -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let p = random_problem(10, 4, 0.5, true, 700 + seed).map_err(|e| e.to_string())?;
        let theta = exact_minimizer(&p, p.base()).unwrap();
        let star = exact_minimizer(&p, p.shifted()).unwrap();
        let curve = interpolation_curve(&p, theta.as_slice(), star.as_slice(), &alpha_grid(-0.25, 1.25, 41)).unwrap();
        for pt in &curve {
            worst = worst.max((pt.shifted_train_loss - pt.test_loss).abs());
        }
    }
    if worst > 1e-9 {
        return Err(format!("quadratic curves differ by {worst:e}"));
    }
    let star = fine_tune(&digits.model, &digits.theta, &digits.shifted, &FinetuneConfig::default(), 7)
        .map_err(|e| e.to_string())?
        .params;
    let surface = NeuralSurface::<f64, MlpModel>::new(&digits.model, &digits.train_set, &digits.shifted);
    let curve = interpolation_curve(&surface, digits.theta.as_slice(), star.as_slice(), &alpha_grid(0.0, 1.0, 21))
        .map_err(|e| e.to_string())?;
    let xs: Vec<f64> = curve.iter().map(|p| p.shifted_train_loss).collect();
    let ys: Vec<f64> = curve.iter().map(|p| p.test_loss).collect();
    let corr = pearson(&xs, &ys).map_err(|e| e.to_string())?;
    check(corr >= 0.9, format!("quadratic max gap {worst:.1e}; MLP Pearson {corr:.4}"))
}

// ---------------------------------------------------------------- 9

#[derive(Default)]
struct Means {
    metric: f64,
    top_eigen: f64,
    attack_increase: f64,
}

struct Task {
    name: &'static str,
    model: Box<dyn Model<f64>>,
    data: Vec<(Dataset, Dataset)>,
    optimizer: OptimizerConfig<f64>,
    epochs: usize,
    radius: f64,
}

fn task_means(task: &Task, sam: Option<&SamConfig<f64>>) -> Means {
    let mut m = Means::default();
    let n = task.data.len() as f64;
    let plain = SamConfig::disabled();
    for (seed, (tr, te)) in task.data.iter().enumerate() {
        let seed = seed as u64;
        let model = task.model.as_ref();
        let opts = TrainOptions { epochs: task.epochs, batch_size: 32, seed, eval_chunk: 512 };
        let (p, _) = train(model, model.init_params(seed), tr, None, &task.optimizer, sam.unwrap_or(&plain), &opts, |_| Ok(()))
            .unwrap();
        m.metric += evaluate(model, &p, te, 512).unwrap().metric / n;
        let mut sc = SpectrumConfig::new(1, 256.min(tr.len()));
        sc.seed = seed;
        m.top_eigen += fisher_spectrum(model, &p, tr, &sc).unwrap().eigenvalues[0] / n;
        let a = corruption_attack(model, &p, te, &AttackConfig::new(NormOrder::L2, 0.5, 5)).unwrap();
        m.attack_increase += (a.corrupted.loss - a.clean.loss) / n;
    }
    m
}

fn criterion_directional() -> Outcome {
    let seeds = 5u64;
    let mut gauss_shift = vec![0.0; 10];
    gauss_shift[..3].copy_from_slice(&[0.7, -0.7, 0.5]);
    let gaussian = Task {
        name: "gaussian",
        model: Box::new(MlpModel::new(&[10, 32, 2], Activation::Relu).unwrap()),
        data: (0..seeds)
            .map(|s| gen_gaussian_task(&GaussianTask::new(2, 10, 200, gauss_shift.clone(), 100 + s)).unwrap())
            .collect(),
        optimizer: OptimizerConfig::sgd(0.1),
        epochs: 20,
        radius: 0.1,
    };
    let corpus_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/corpus.txt");
    let corpus = load_char_corpus(&corpus_path, 32).map_err(|e| e.to_string())?;
    let (tr, te) = corpus.split(0.1).map_err(|e| e.to_string())?;
    let lm_data = (tr.subset(&(0..600).collect::<Vec<_>>()), te.subset(&(0..150).collect::<Vec<_>>()));
    let lm = Task {
        name: "char-lm",
        model: Box::new(RnnLmModel::new(corpus.vocab.len(), 16, 48, false).unwrap()),
        data: vec![lm_data; seeds as usize],
        optimizer: OptimizerConfig::adam(0.01),
        epochs: 15,
        radius: 0.02,
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for task in [gaussian, lm] {
        let base = task_means(&task, None);
        let ga = task_means(&task, Some(&SamConfig::ga_sam(3, task.radius, NormOrder::L2)));
        let better = if task.model.metric().higher_is_better() { ga.metric >= base.metric } else { ga.metric <= base.metric };
        let flatter = ga.top_eigen <= base.top_eigen;
        let robust = ga.attack_increase <= base.attack_increase;
        ok &= better && flatter && robust;
        lines.push(format!(
            "{} {}: {:.4}/{:.4} {} top-eig {:.4}/{:.4} {} attack {:.4}/{:.4} {}",
            task.name,
            task.model.metric().name(),
            ga.metric,
            base.metric,
            mark(better),
            ga.top_eigen,
            base.top_eigen,
            mark(flatter),
            ga.attack_increase,
            base.attack_increase,
            mark(robust),
        ));
    }
    check(ok, format!("GA-SAM/baseline over 5 seeds; {}", lines.join("; ")))
}

fn mark(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "X"
    }
}

// ---------------------------------------------------------------- 10

fn criterion_degenerate() -> Outcome {
    let data = toy_set(10, 40);
    let opts = TrainOptions { epochs: 3, batch_size: 8, seed: 2, eval_chunk: 64 };
    let (model, init) = build_mlp::<f64>(&[5, 8, 3], 5).unwrap();
    let run = |cfg: &SamConfig<f64>| {
        train(&model, init.clone(), &data, Some(&data), &OptimizerConfig::sgd(0.1), cfg, &opts, |_| Ok(())).unwrap()
    };
    let (plain, mp) = run(&SamConfig::disabled());
    for cfg in [SamConfig::ga_sam(3, 0.0, NormOrder::L2), SamConfig::ga_sam(2, 0.0, NormOrder::LInf), SamConfig::vanilla(0.0, NormOrder::L2)] {
        let (w, m) = run(&cfg);
        let same_bits = w.as_slice().iter().zip(plain.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
        if !same_bits || m.epochs.iter().zip(&mp.epochs).any(|(a, b)| a.train_loss.to_bits() != b.train_loss.to_bits()) {
            return Err(format!("radius 0 ({:?}) diverged from plain training", cfg.implementation));
        }
    }
    let batch = data.full_batch::<f64>();
    let part = GroupPartition::new(Granularity::Model, Model::<f64>::layout(&model));
    let (_, g) = loss_and_grad(&model, &init, &batch).unwrap();
    let norm = g.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    for eps in [1e-3, 0.05, 0.7] {
        let cfg = SamConfig::vanilla(eps, NormOrder::L2);
        assert_eq!(cfg.implementation, Implementation::SingleStep);
        let r = single_step_objective(&model, &init, &batch, &cfg, &part).map_err(|e| e.to_string())?;
        let expect: Vec<f64> = g.as_slice().iter().map(|&x| x * (eps / norm)).collect();
        if r.state.corruption.as_slice() != expect.as_slice() {
            return Err(format!("vanilla corruption differs from eps g/|g| at eps {eps}"));
        }
    }
    Ok("radius 0 bit-identical to plain (3 configs); vanilla a1 = eps g/|g| exactly".into())
}

// ---------------------------------------------------------------- 11

const CLI_CONFIG: &str = r#"
[model]
sizes = [784, 24, 10]
seed = 3

[data]
source = "digits"
seed = 5
train_size = 300
test_size = 300

[optimizer]
lr = 0.1
epochs = 2
batch_size = 50
seed = 3

[sam]
steps = 2
radius = 0.01
rule = "GA_SAM"

[spectrum]
k = 5
samples = 40

[shift]
grid = [0.0, 0.5, 1.0]

[output]
run_id = "repro"
"#;

fn cli_outputs(cfg: &Path, out: &Path) -> Result<Vec<PathBuf>, String> {
    for cmd in ["train", "attack", "spectrum", "shift-trial", "interp-curve"] {
        let o = Command::new(env!("CARGO_BIN_EXE_samlab"))
            .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "11", cmd])
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{cmd}: {}", String::from_utf8_lossy(&o.stderr)));
        }
    }
    let mut files: Vec<PathBuf> = fs::read_dir(out)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn strip_timestamp(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

fn criterion_reproducible() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("repro.cfg");
    fs::write(&cfg, CLI_CONFIG).map_err(|e| e.to_string())?;
    let a = cli_outputs(&cfg, &dir.path().join("a"))?;
    let b = cli_outputs(&cfg, &dir.path().join("b"))?;
    if a.len() != 7 || a.iter().map(|p| p.file_name()).ne(b.iter().map(|p| p.file_name())) {
        return Err(format!("unexpected outputs {a:?} / {b:?}"));
    }
    for (x, y) in a.iter().zip(&b) {
        if strip_timestamp(x) != strip_timestamp(y) {
            return Err(format!("{} differs between runs", x.display()));
        }
    }
    Ok(format!("5 commands, {} CSV files identical apart from timestamps", a.len()))
}

// ----------------------------------------------------------------

fn main() {
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match &out {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} [{id:>2}] {name} ({secs:.1}s): {detail}");
        results.push((id, name, out, secs));
    };
    run(1, "autodiff finite differences", &criterion_autodiff);
    run(2, "ascent step maximality", &criterion_ascent);
    run(3, "projection contract", &criterion_projection);
    run(4, "pass-count cost", &criterion_cost);
    run(5, "displacement formula oracle", &criterion_delta);
    run(6, "displacement bound audit", &criterion_bound);
    let digits = digits_run();
    run(7, "linear displacement vs mix fraction", &|| criterion_linear_shift(&digits));
    run(8, "shifted-train vs test curves", &|| criterion_interpolation(&digits));
    run(9, "directional training claims", &criterion_directional);
    run(10, "degenerate-config equivalences", &criterion_degenerate);
    run(11, "CLI reproducibility", &criterion_reproducible);
    let failed: Vec<usize> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

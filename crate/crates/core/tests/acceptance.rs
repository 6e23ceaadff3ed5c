//! Acceptance suite: model-level checks against the measured benchmark
//! system plus randomized property gates. Each test prints one pass/fail
//! line (visible with `cargo test --test acceptance -- --nocapture`).

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use omsim::budget::{
    self, displacement_budget, FrequencyGrid, NoiseBudget,
};
use omsim::cavity;
use omsim::config::{validate_config, ControllerParams, LossChain, LossEntry, LossSide, SystemConfig, ValidatedSystem};
use omsim::constants::HBAR;
use omsim::loopcal::{closed_loop_spectrum, undo_loop, LoopModel};
use omsim::quantum::{
    apply_loss, chain_efficiency, rotate, squeezed_covariance, SideFilter,
};

const PAPER_JSON: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/paper.json");

fn paper_sys() -> ValidatedSystem {
    let cfg = SystemConfig::from_file(PAPER_JSON).unwrap();
    validate_config(cfg).unwrap()
}

fn report(n: u32, desc: &str, pass: bool, detail: &str) {
    println!(
        "acceptance criterion {n} ({desc}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n}: {detail}");
}

#[test]
fn criterion_01_efficiency_chain() {
    let chain = LossChain {
        entries: vec![
            entry("propagation", 0.53, LossSide::Injection),
            entry("escape", 0.97, LossSide::Injection),
            entry("mode_matching", 0.80, LossSide::Injection),
            entry("photodiode", 0.97, LossSide::Readout),
        ],
    };
    let total = chain_efficiency(&chain, SideFilter::All);
    report(
        1,
        "total loss efficiency",
        (total - 0.399).abs() <= 0.005,
        &format!("product = {total:.4}, expected 0.399 +/- 0.005"),
    );
}

fn entry(name: &str, efficiency: f64, side: LossSide) -> LossEntry {
    LossEntry {
        name: name.into(),
        efficiency,
        side,
    }
}

#[test]
fn criterion_02_optical_spring() {
    let sys = paper_sys();
    let res = cavity::optical_spring_resonance(&sys).unwrap();
    let f_hz = res / (2.0 * std::f64::consts::PI);
    let rate = cavity::antidamping_rate(&sys, res);
    report(
        2,
        "optical spring resonance and instability",
        (110e3..=210e3).contains(&f_hz) && rate < 0.0,
        &format!("resonance = {f_hz:.0} Hz (band 110-210 kHz), net damping = {rate:.3e} 1/s"),
    );
}

#[test]
fn criterion_03_noise_hierarchy() {
    let sys = paper_sys();
    let grid = FrequencyGrid::log_spaced(100.0, 1e6, 100).unwrap();
    let b = displacement_budget(&sys, &grid);
    let qrpn_dominant_in_band = grid
        .points()
        .iter()
        .enumerate()
        .filter(|(_, f)| (10e3..=50e3).contains(*f))
        .all(|(i, _)| b.qrpn[i] >= b.thermal[i]);
    let i1k = grid.nearest_index(1e3);
    let thermal_dominant_low = b.thermal[i1k] > b.qrpn[i1k];
    let crossover = grid
        .points()
        .iter()
        .zip(b.thermal.iter().zip(&b.qrpn))
        .find(|(_, (t, q))| q >= t)
        .map(|(f, _)| *f)
        .unwrap_or(f64::NAN);
    let pass =
        qrpn_dominant_in_band && thermal_dominant_low && (5e3..=25e3).contains(&crossover);
    report(
        3,
        "thermal/QRPN hierarchy",
        pass,
        &format!(
            "QRPN >= thermal over 10-50 kHz: {qrpn_dominant_in_band}, thermal > QRPN at 1 kHz: \
             {thermal_dominant_low}, crossover = {crossover:.0} Hz (band 5-25 kHz)"
        ),
    );
}

#[test]
fn criterion_04_squeeze_phase_reproduction() {
    let sys = paper_sys();
    let r = budget::fit_r(&sys, 12.6, 20e3).unwrap();
    let sys = sys.with_squeeze(r, 0.0);
    let grid = FrequencyGrid::new(vec![20e3]).unwrap();
    let n = 48usize;
    let phases: Vec<f64> = (0..2 * n)
        .map(|i| i as f64 * std::f64::consts::PI / n as f64)
        .collect();
    let map = budget::phase_sweep_map(&sys, &grid, &phases);
    let col: Vec<f64> = map.ratio_db.iter().map(|row| row[0]).collect();

    let periodic = (0..n).all(|i| (col[i] - col[i + n]).abs() < 1e-12);
    let imin = argext(&col, |a, b| a < b);
    let imax = argext(&col, |a, b| a > b);
    let min_db = col[imin];
    let min_at_zero = matches!(imin % n, j if j == 0 || j == 1 || j == n - 1);
    let max_at_quarter = (imax % n).abs_diff(n / 2) <= 1;
    let reduction_ok = (-1.7..=-0.7).contains(&min_db);
    let pass = periodic && reduction_ok && min_at_zero && max_at_quarter;
    report(
        4,
        "squeeze-phase sweep",
        pass,
        &format!(
            "fitted r = {r:.4}, minimum = {min_db:.2} dB (expect -1.2 +/- 0.5), pi-periodic: \
             {periodic}, extrema at theta=0/pi/2: {min_at_zero}/{max_at_quarter}"
        ),
    );
}

fn argext(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut idx = 0;
    for (i, &v) in values.iter().enumerate() {
        if better(v, values[idx]) {
            idx = i;
        }
    }
    idx
}

#[test]
fn criterion_05_sql_proximity() {
    let sys = paper_sys();
    let grid = FrequencyGrid::log_spaced(1e3, 100e3, 100).unwrap();
    let b = displacement_budget(&sys, &grid);
    let min_ratio = b
        .total
        .iter()
        .zip(&b.sql)
        .map(|(t, s)| (t / s).sqrt())
        .fold(f64::INFINITY, f64::min);
    report(
        5,
        "SQL proximity",
        (1.0..=5.0).contains(&min_ratio),
        &format!("min total/SQL amplitude ratio over 1-100 kHz = {min_ratio:.2} (band [1, 5])"),
    );
}

#[test]
fn criterion_06_structural_damping_slope() {
    let sys = paper_sys();
    let grid = FrequencyGrid::log_spaced(1e3, 30e3, 100).unwrap();
    let b = displacement_budget(&sys, &grid);
    let xs: Vec<f64> = grid.points().iter().map(|f| f.log10()).collect();
    let ys: Vec<f64> = b
        .thermal
        .iter()
        .zip(&b.qrpn)
        .map(|(t, q)| (t / q).sqrt().log10())
        .collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    report(
        6,
        "thermal/QRPN amplitude slope",
        (slope + 0.50).abs() <= 0.02,
        &format!("log-log slope over 1-30 kHz = {slope:.4} (expect -0.50 +/- 0.02)"),
    );
}

#[test]
fn criterion_07_gaussian_state_properties() {
    let mut rng = StdRng::seed_from_u64(0x6f6d_7369);
    let mut worst_det = f64::INFINITY;
    let mut worst_comp = 0.0f64;
    for _ in 0..10_000 {
        let r = rng.gen_range(0.0..3.0);
        let theta = rng.gen_range(0.0..std::f64::consts::PI);
        let eta = rng.gen_range(0.0..=1.0);
        let v = squeezed_covariance(r, theta).unwrap();
        let w = apply_loss(&v, eta).unwrap();
        worst_det = worst_det.min(w.det());
        assert!(w.det() >= 1.0 - 1e-9, "physicality closure");

        let eta2: f64 = rng.gen_range(0.0..=1.0);
        let a = apply_loss(&w, eta2).unwrap();
        let b = apply_loss(&v, eta * eta2).unwrap();
        for (x, y) in [(a.aa, b.aa), (a.ap, b.ap), (a.pp, b.pp)] {
            let err = (x - y).abs() / y.abs().max(1.0);
            worst_comp = worst_comp.max(err);
            assert!(err < 1e-12, "loss composition identity");
        }

        let rot = rotate(&v, rng.gen_range(0.0..std::f64::consts::TAU));
        assert!(
            (rot.det() - v.det()).abs() < 1e-9 * v.trace(),
            "rotation determinant preservation"
        );

        let floor = apply_loss(&squeezed_covariance(r, 0.0).unwrap(), eta).unwrap();
        assert!(floor.aa >= 1.0 - eta - 1e-12, "antisqueezing floor");
    }
    report(
        7,
        "Gaussian state property suite",
        true,
        &format!(
            "10000 cases: min det = {worst_det:.9}, max composition error = {worst_comp:.2e}"
        ),
    );
}

#[test]
fn criterion_08_loop_calibration() {
    let sys = paper_sys();
    let grid = FrequencyGrid::log_spaced(100.0, 1e6, 100).unwrap();
    let open = displacement_budget(&sys, &grid);
    let mut rng = StdRng::seed_from_u64(0x6c6f_6f70);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let ctrl = ControllerParams {
            gain: rng.gen_range(0.0..100.0),
            zeros_hz: (0..rng.gen_range(0..3))
                .map(|_| rng.gen_range(1e3..1e6))
                .collect(),
            poles_hz: (0..rng.gen_range(0..3))
                .map(|_| rng.gen_range(1e3..1e6))
                .collect(),
            delay_s: rng.gen_range(0.0..1e-6),
            plant_scale: rng.gen_range(1e-2..1e2),
        };
        let gain = LoopModel::new(ctrl, &sys).gain_table(&grid);
        let closed = closed_loop_spectrum(&open, &gain).unwrap();
        let back = undo_loop(&closed, &gain, None).unwrap();
        for name in NoiseBudget::SERIES_NAMES {
            for (x, y) in open
                .series(name)
                .unwrap()
                .iter()
                .zip(back.series(name).unwrap())
            {
                let err = (x - y).abs() / x.abs().max(f64::MIN_POSITIVE);
                worst = worst.max(err);
                assert!(err <= 1e-12, "round trip {name}");
            }
        }
    }

    let stability_grid = FrequencyGrid::log_spaced(100.0, 2e7, 64).unwrap();
    let refined = FrequencyGrid::log_spaced(100.0, 2e7, 128).unwrap();
    let zero_gain = ControllerParams {
        gain: 0.0,
        zeros_hz: vec![],
        poles_hz: vec![],
        delay_s: 0.0,
        plant_scale: 1.0,
    };
    let lead = paper_sys().config().controller.clone().unwrap();
    let open_loop = LoopModel::new(zero_gain, &sys);
    let closed_loop = LoopModel::new(lead, &sys);
    let unstable_open = !open_loop.is_stable(&stability_grid).unwrap().stable;
    let stable_lead = closed_loop.is_stable(&stability_grid).unwrap().stable;
    let invariant = open_loop.is_stable(&refined).unwrap().stable == !unstable_open
        && closed_loop.is_stable(&refined).unwrap().stable == stable_lead;
    let pass = unstable_open && stable_lead && invariant;
    report(
        8,
        "loop calibration and stability",
        pass,
        &format!(
            "100 controllers round-trip (max error {worst:.2e}), zero-gain unstable: \
             {unstable_open}, lead controller stable: {stable_lead}, refinement-invariant: {invariant}"
        ),
    );
}

#[test]
fn criterion_09_heisenberg_product() {
    let mut cfg = SystemConfig::from_file(PAPER_JSON).unwrap();
    cfg.losses.entries.clear();
    cfg.squeezer.escape_efficiency = 1.0;
    cfg.squeezer.r = 0.0;
    let sys = validate_config(cfg).unwrap();
    let grid = FrequencyGrid::log_spaced(100.0, 1e6, 100).unwrap();
    let b = displacement_budget(&sys, &grid);
    let mut worst = 0.0f64;
    for i in 0..grid.len() {
        let product = b.shot[i] * b.qrpn[i]
            / cavity::effective_susceptibility(
                &sys,
                2.0 * std::f64::consts::PI * grid.points()[i],
            )
            .0
            .norm_sqr();
        worst = worst.max((product - HBAR * HBAR).abs() / (HBAR * HBAR));
    }
    report(
        9,
        "coherent force-imprecision product",
        worst < 1e-9,
        &format!("max relative deviation from hbar^2 = {worst:.2e}"),
    );
}

#[test]
fn criterion_10_budget_determinism() {
    let bin = env!("CARGO_BIN_EXE_omsim");
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        let status = std::process::Command::new(bin)
            .args(["budget", "--config", PAPER_JSON, "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    report(
        10,
        "byte-identical budget output",
        a == b,
        &format!("two invocations, {} bytes each", a.len()),
    );
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use qnd_core::gaussian_prep::violation_scan_with;
use qnd_core::instruments;
use qnd_core::moments::{check_relations, joint_noise_disturbance, variances, Ordering, Variable};
use qnd_core::oracle::{compare, compare_initial, stages, DeviationKind, OracleOptions, OracleSetup};
use qnd_core::sampler::{run_protocol, ProtocolOptions};
use qnd_core::Exec;

use crate::config::Config;
use crate::error::CliError;
use crate::report::{num, text, Csv};

fn name(v: Variable) -> &'static str {
    match v {
        Variable::X => "x",
        Variable::K => "k",
    }
}

fn finite(values: &[(&str, f64)]) -> Result<(), CliError> {
    match values.iter().find(|(_, v)| !v.is_finite()) {
        Some((q, v)) => Err(qnd_core::Error::Representation(format!("{q} evaluated to {v}")).into()),
        None => Ok(()),
    }
}

pub fn predict(config: &Config, out: &mut dyn Write) -> Result<(), CliError> {
    let (s, _) = config.canonical()?;
    let v = variances(&s)?;
    let mut rows: Vec<(String, f64, &str)> = Vec::new();
    let status = |eta2: f64| if eta2 < 0.0 { "reduction" } else { "" };
    match s.ordering() {
        Ordering::Joint => {
            let [x, k] = joint_noise_disturbance(&s)?;
            rows.extend([
                ("delta2_x".into(), v.delta2_first, ""),
                ("delta2_k".into(), v.delta2_second_given_first, ""),
                ("epsilon2_x".into(), x.epsilon2, ""),
                ("eta2_k_given_x".into(), x.eta2_signed, status(x.eta2_signed)),
                ("d_x".into(), x.d_sys_error, ""),
                ("d_k_given_x".into(), x.d_sys_disturbance, ""),
                ("epsilon2_k".into(), k.epsilon2, ""),
                ("eta2_x_given_k".into(), k.eta2_signed, status(k.eta2_signed)),
                ("d_k".into(), k.d_sys_error, ""),
                ("d_x_given_k".into(), k.d_sys_disturbance, ""),
            ]);
        }
        ordering => {
            let nd = qnd_core::moments::noise_disturbance(&s)?;
            let (f, o) = (name(ordering.first()), name(ordering.first().other()));
            rows.extend([
                (format!("delta2_{f}"), v.delta2_first, ""),
                (format!("delta2_{o}_given_{f}"), v.delta2_second_given_first, ""),
                (format!("delta2_{o}"), v.delta2_second_alone, ""),
                (format!("epsilon2_{f}"), nd.epsilon2, ""),
                (format!("eta2_{o}_given_{f}"), nd.eta2_signed, status(nd.eta2_signed)),
                (format!("d_{f}"), nd.d_sys_error, ""),
                (format!("d_{o}_given_{f}"), nd.d_sys_disturbance, ""),
                (format!("total_error2_{f}"), nd.total_error2, ""),
                (format!("total_disturbance2_{o}"), nd.total_disturbance2, ""),
            ]);
        }
    }
    for c in check_relations(&s)?.checks {
        rows.push((c.relation.name().into(), c.lhs, c.status.as_str()));
    }
    finite(&rows.iter().map(|(q, v, _)| (q.as_str(), *v)).collect::<Vec<_>>())?;
    let mut csv = Csv::new(out, "predict", &["quantity", "value", "status"])?;
    for (q, v, st) in rows {
        csv.row(&[q, num(v), text(st)])?;
    }
    Ok(())
}

pub struct OracleArgs<'a> {
    pub identity: bool,
    pub dump: Option<&'a Path>,
    pub exec: Exec,
}

fn options(config: &Config, exec: Exec) -> OracleOptions {
    OracleOptions { n: config.grid_n, extent_sigmas: config.extent_sigmas, exec }
}

fn dump_prefixed(prefix: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = prefix.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    prefix.with_file_name(name)
}

pub fn oracle(config: &Config, args: OracleArgs<'_>, out: &mut dyn Write) -> Result<(), CliError> {
    let (s, prep) = config.canonical()?;
    let opts = options(config, args.exec);
    let report = if args.identity { compare_initial(&s, prep, opts)? } else { compare(&s, prep, opts)? };
    let mut csv = Csv::new(out, "oracle", &["quantity", "analytic", "oracle", "deviation", "kind"])?;
    for r in &report.rows {
        let kind = match r.kind {
            DeviationKind::Relative => "relative",
            DeviationKind::Absolute => "absolute",
        };
        csv.row(&[text(r.quantity), num(r.analytic), num(r.oracle), num(r.deviation()), text(kind)])?;
    }
    for (axis, c) in ["system", "probe_x", "probe_k"].iter().zip(report.coverage) {
        csv.row(&[format!("coverage_{axis}"), String::new(), num(c), String::new(), text("sigmas")])?;
    }

    if let Some(prefix) = args.dump {
        let run = if args.identity { Vec::new() } else { stages(s.ordering()) };
        let setup = OracleSetup::new(&s, prep, std::slice::from_ref(&run), opts)?;
        let tables = setup.readouts(&run)?;
        for (suffix, table) in ["_jx.csv", "_jk.csv"].iter().zip(&tables) {
            let mut w = BufWriter::new(File::create(dump_prefixed(prefix, suffix))?);
            writeln!(w, "# qnd-lab,v1,oracle-readout")?;
            table.write_csv(&mut w)?;
            w.flush()?;
        }
    }

    let tolerance = if args.identity { config.tolerance.min(1e-6) } else { config.tolerance };
    let worst = report.rows.iter().max_by(|a, b| a.deviation().total_cmp(&b.deviation()));
    match worst {
        Some(w) if !(w.deviation() <= tolerance) => {
            Err(CliError::Tolerance(format!("{} deviates by {:e} (tolerance {tolerance:e})", w.quantity, w.deviation())))
        }
        _ => Ok(()),
    }
}

pub struct SampleArgs<'a> {
    pub batches: Option<&'a Path>,
    pub exec: Exec,
}

pub fn sample(config: &Config, args: SampleArgs<'_>, out: &mut dyn Write) -> Result<(), CliError> {
    let (s, prep) = config.canonical()?;
    let mut opts = ProtocolOptions::new(config.samples, config.seed);
    opts.oracle = options(config, args.exec);
    let r = run_protocol(&s, prep, opts)?;
    let (f, o) = (name(r.first), name(r.first.other()));
    let a = r.analytic;
    let eps_eta = r.product.value.max(0.0).sqrt();
    // first-order error propagation through the square root
    let eps_eta_se = if eps_eta > 0.0 { r.product.se / (2.0 * eps_eta) } else { f64::NAN };
    let analytic_product = a.epsilon2 * a.eta2_signed;
    let rows = [
        (format!("sigma2_{f}"), r.calibration.sigma2_hat.value, r.calibration.sigma2_hat.se, s.system.sigma(r.first).powi(2)),
        (format!("epsilon2_{f}"), r.calibration.epsilon2_hat.value, r.calibration.epsilon2_hat.se, a.epsilon2),
        (format!("d_{f}"), r.calibration.d_hat.value, r.calibration.d_hat.se, a.d_sys_error),
        (format!("eta2_{o}_given_{f}"), r.disturbance.eta2_hat.value, r.disturbance.eta2_hat.se, a.eta2_signed),
        (format!("d_{o}_given_{f}"), r.disturbance.d_dist_hat.value, r.disturbance.d_dist_hat.se, a.d_sys_disturbance),
        ("epsilon2_eta2".to_string(), r.product.value, r.product.se, analytic_product),
        ("epsilon_eta".to_string(), eps_eta, eps_eta_se, analytic_product.max(0.0).sqrt()),
    ];
    let mut csv = Csv::new(out, "sample", &["quantity", "estimate", "se", "analytic"])?;
    for (q, v, se, an) in rows {
        csv.row(&[q, num(v), num(se), num(an)])?;
    }
    // distance of ε̂η̂ below the Heisenberg bound, in standard errors
    csv.row(&[text("heisenberg_margin_se"), num((0.5 - eps_eta) / eps_eta_se), String::new(), String::new()])?;
    csv.row(&[text("samples"), r.samples.to_string(), String::new(), String::new()])?;
    csv.row(&[text("seed"), r.seed.to_string(), String::new(), String::new()])?;

    if let Some(prefix) = args.batches {
        for (suffix, batch) in ["_reference.csv", "_test.csv", "_without.csv"].iter().zip(&r.batches) {
            let mut w = BufWriter::new(File::create(dump_prefixed(prefix, suffix))?);
            writeln!(w, "# qnd-lab,v1,sample-batch,{},{}", batch.scenario_id, batch.seed)?;
            batch.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

pub fn scan(t: (f64, f64), r: (f64, f64), steps: (usize, usize), exec: Exec, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = violation_scan_with(t, r, steps, exec)?;
    let mut csv = Csv::new(out, "scan", &["t", "r", "epsilon2", "eta2", "product", "classification"])?;
    for row in rows {
        csv.row(&[
            num(row.t),
            num(row.r),
            num(row.epsilon2),
            num(row.eta2),
            num(row.product),
            text(row.classification.as_str()),
        ])?;
    }
    Ok(())
}

pub fn check_instruments(dim: usize, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let r = instruments::demo(dim, seed)?;
    let mut csv = Csv::new(out, "check-instruments", &["quantity", "value"])?;
    let rows = [
        ("product_discrepancy", r.product_discrepancy),
        ("product_swapped_correlation", r.product_swapped),
        ("bell_discrepancy", r.bell_discrepancy),
        ("bell_swapped_correlation", r.bell_swapped),
        ("marginal_discrepancy", r.marginal_discrepancy),
        ("axiom_empty", r.axioms.empty),
        ("axiom_additivity", r.axioms.additivity),
        ("axiom_normalization", r.axioms.normalization),
        ("effect_deviation", r.effect_deviation),
    ];
    csv.row(&[text("dim"), r.dim.to_string()])?;
    csv.row(&[text("seed"), r.seed.to_string()])?;
    csv.row(&[text("axiom_states"), r.axiom_states.to_string()])?;
    for (q, v) in rows {
        csv.row(&[text(q), num(v)])?;
    }
    let exact = instruments::TOLERANCE;
    if !(r.axioms.passed() && r.effect_deviation <= exact && r.marginal_discrepancy <= exact && r.product_discrepancy <= exact) {
        return Err(CliError::Tolerance(format!("instrument checks exceed {exact:e}")));
    }
    if !(r.bell_discrepancy > 0.01) {
        return Err(CliError::Tolerance(format!("Bell-probe discrepancy {:e} is not above 0.01", r.bell_discrepancy)));
    }
    Ok(())
}

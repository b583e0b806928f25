use l2v_core::error::StageExt;
use l2v_core::latrep::{covariance_trace, pca_fit, pca_project, DirectionSet};
use l2v_core::scalar::{cosine, l2_norm};
use l2v_core::spectral::{band_energies, band_label, lowpass_filter, RELATIVE_ERROR_FLOOR};
use l2v_core::steering::{
    extract_from_pair, inject, make_hook, SteeringConfig, SteeringVector,
};
use l2v_core::tensor_store::{ActivationMatrix, Precision, Role};
use l2v_core::toymodel::{
    collect_final_states, contrastive_prompts, drift_experiment, synth_directions, toy_forward,
    SynthSpec, ToyNetConfig, ToyNetParams,
};
use l2v_core::{Error, Result};

use crate::args::*;
use crate::config::{required, resolve};
use crate::manifest::Run;
use crate::plot;

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// Shortest round-trip text; exponent form outside [1e-5, 1e16).
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{}", x + 0.0)
    } else {
        format!("{:e}", x)
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn path_str(p: &std::path::Path) -> String {
    p.display().to_string()
}

pub fn extract(args: ExtractArgs) -> Result<Run> {
    let opts = args.run.clone();
    let a = resolve(args, opts.config.as_deref()).stage("resolve_config")?;
    let pos_path = required(a.pos, "pos").stage("resolve_config")?;
    let neg_path = required(a.neg, "neg").stage("resolve_config")?;
    let out = required(a.out, "out").stage("resolve_config")?;
    let mut run = Run::new("extract", opts.manifest);

    let pos = run.read_tensor("positive", &pos_path).stage("read_positive")?;
    let neg = run.read_tensor("negative", &neg_path).stage("read_negative")?;

    let layer_source = match (a.layer_source, pos.layer) {
        (Some(l), Some(t)) if l != t => Err(Error::LayerMismatch(Some(l), Some(t))),
        (Some(l), _) => Ok(l),
        (None, Some(t)) => Ok(t),
        (None, None) => Err(usage(
            "inputs carry no layer tag; pass --layer-source (or \"layer_source\" in the config file)",
        )),
    }
    .stage("resolve_config")?;
    let d_source = a.d_source.unwrap_or(pos.d());
    let d_target = a.d_target.unwrap_or(d_source);
    let bypass_filter = a.bypass_filter.unwrap_or(false);
    let k = match a.k {
        Some(k) => k,
        None if bypass_filter => d_source.min(d_target),
        None => return Err(usage("missing --k (or \"k\" in the config file)")).stage("resolve_config"),
    };
    let cfg = SteeringConfig {
        k,
        d_source,
        d_target,
        layer_source,
        layer_target: a.layer_target.unwrap_or(layer_source),
        alpha: a.alpha.unwrap_or(1.0),
        bypass_filter,
        positions: a.positions.unwrap_or_default(),
        filter_mode: a.filter_mode.unwrap_or_default(),
    };
    run.set_config(serde_json::json!({
        "pos": path_str(&pos_path),
        "neg": path_str(&neg_path),
        "out": path_str(&out),
        "steering": cfg,
    }));

    let sv = extract_from_pair(&pos, &neg, &cfg)?;
    let bytes = sv.to_matrix()?.to_bytes(Precision::F64).stage("write_output")?;
    run.output("steering_vector", &out, bytes)?;
    run.result("n_pairs", pos.n());
    run.result("original_norm", sv.original_norm);
    run.result("vector_norm", l2_norm(&sv.values));
    Ok(run)
}

pub fn analyze(args: AnalyzeArgs) -> Result<Run> {
    let opts = args.run.clone();
    let a = resolve(args, opts.config.as_deref()).stage("resolve_config")?;
    let dirs_path = required(a.dirs, "dirs").stage("resolve_config")?;
    let out = required(a.out, "out").stage("resolve_config")?;
    let m = a.m.unwrap_or(2);
    let mut run = Run::new("analyze", opts.manifest);
    run.set_config(serde_json::json!({
        "dirs": path_str(&dirs_path),
        "m": m,
        "out": path_str(&out),
        "svg": a.svg.as_deref().map(path_str),
    }));

    let matrix = run.read_tensor("dirs", &dirs_path).stage("read_dirs")?;
    let dirs = DirectionSet::from_matrix(matrix).stage("read_dirs")?;
    let trace = covariance_trace(&dirs);
    let model = pca_fit(&dirs, m).stage("pca")?;
    let proj = pca_project(&model, dirs.matrix()).stage("pca")?;

    let mut header = vec!["sample_id".to_string()];
    header.extend((1..=m).map(|c| format!("pc{c}")));
    let rows: Vec<Vec<String>> = proj
        .rows()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![i.to_string()];
            row.extend(r.iter().map(|&x| fmt_f64(x)));
            row
        })
        .collect();
    run.output("projections_csv", &out, csv_bytes(&header, &rows))?;
    if let Some(svg) = &a.svg {
        let pts: Vec<(f64, f64)> = proj
            .rows()
            .map(|r| (r[0], if m > 1 { r[1] } else { 0.0 }))
            .collect();
        let title = format!("PCA of {} directions (trace {:.4})", dirs.n(), trace);
        let ylabel = if m > 1 { "PC2" } else { "" };
        run.output("scatter_svg", svg, plot::scatter(&title, "PC1", ylabel, &pts).into_bytes())?;
    }
    run.result("trace", trace);
    run.result("n", dirs.n());
    run.result("d", dirs.d());
    run.result("explained_variance", &model.explained_variance);
    Ok(run)
}

struct BandRow {
    index: usize,
    label: String,
    start: usize,
    end: usize,
    energy_a: f64,
    energy_b: f64,
    relative_error: f64,
}

pub fn bands(args: BandsArgs) -> Result<Run> {
    let opts = args.run.clone();
    let a = resolve(args, opts.config.as_deref()).stage("resolve_config")?;
    let b_path = required(a.b, "b").stage("resolve_config")?;
    let out = required(a.out, "out").stage("resolve_config")?;
    let n_bands = a.n_bands.unwrap_or(8);
    if a.a.is_some() == a.k.is_some() {
        return Err(usage("give exactly one of --a and --k")).stage("resolve_config");
    }
    let mut run = Run::new("bands", opts.manifest);
    run.set_config(serde_json::json!({
        "a": a.a.as_deref().map(path_str),
        "b": path_str(&b_path),
        "k": a.k,
        "n_bands": n_bands,
        "out": path_str(&out),
        "svg": a.svg.as_deref().map(path_str),
    }));

    let b = run.read_tensor("b", &b_path).stage("read_b")?;
    let a_rows: Vec<Vec<f64>> = match (&a.a, a.k) {
        (Some(p), _) => {
            let m = run.read_tensor("a", p).stage("read_a")?;
            if m.shape() != b.shape() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{}x{}", b.n(), b.d()),
                    found: format!("{}x{}", m.n(), m.d()),
                })
                .stage("read_a");
            }
            m.rows().map(<[f64]>::to_vec).collect()
        }
        (None, Some(k)) => b
            .rows()
            .map(|r| lowpass_filter(r, k))
            .collect::<Result<_>>()
            .stage("lowpass")?,
        (None, None) => unreachable!("checked above"),
    };

    // band energies summed over rows
    let mut ea = vec![0.0; n_bands];
    let mut eb = vec![0.0; n_bands];
    let mut ranges = Vec::new();
    for (ra, rb) in a_rows.iter().zip(b.rows()) {
        let pa = band_energies(ra, n_bands).stage("bands")?;
        let pb = band_energies(rb, n_bands).stage("bands")?;
        ea.iter_mut().zip(&pa.energies).for_each(|(s, e)| *s += e);
        eb.iter_mut().zip(&pb.energies).for_each(|(s, e)| *s += e);
        ranges = pb.ranges;
    }
    let rows: Vec<BandRow> = ranges
        .iter()
        .enumerate()
        .map(|(i, r)| BandRow {
            index: i,
            label: band_label(i),
            start: r.start,
            end: r.end,
            energy_a: ea[i],
            energy_b: eb[i],
            relative_error: (ea[i] - eb[i]).abs() / eb[i].max(RELATIVE_ERROR_FLOOR),
        })
        .collect();

    let header: Vec<String> = [
        "band_index", "label", "freq_start", "freq_end", "energy_a", "energy_b", "relative_error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                r.label.clone(),
                r.start.to_string(),
                r.end.to_string(),
                fmt_f64(r.energy_a),
                fmt_f64(r.energy_b),
                fmt_f64(r.relative_error),
            ]
        })
        .collect();
    run.output("bands_csv", &out, csv_bytes(&header, &table))?;
    if let Some(svg) = &a.svg {
        let labels: Vec<String> = rows.iter().map(|r| r.label.clone()).collect();
        let errs: Vec<f64> = rows.iter().map(|r| r.relative_error).collect();
        let chart = plot::bars(
            "Relative energy difference across frequency bands",
            "frequency band",
            "relative error",
            &labels,
            &errs,
        );
        run.output("bands_svg", svg, chart.into_bytes())?;
    }
    run.result("d", b.d());
    run.result("rows", b.n());
    run.result(
        "relative_error",
        rows.iter().map(|r| r.relative_error).collect::<Vec<_>>(),
    );
    Ok(run)
}

fn read_vector(run: &mut Run, path: &std::path::Path) -> Result<SteeringVector<f64>> {
    let m = run.read_tensor("steering_vector", path)?;
    SteeringVector::from_matrix(&m)
}

pub fn steer(args: SteerArgs) -> Result<Run> {
    let opts = args.run.clone();
    let a = resolve(args, opts.config.as_deref()).stage("resolve_config")?;
    let hidden_path = required(a.hidden, "hidden").stage("resolve_config")?;
    let vector_path = required(a.vector, "vector").stage("resolve_config")?;
    let out = required(a.out, "out").stage("resolve_config")?;
    let mut run = Run::new("steer", opts.manifest);

    let sv = read_vector(&mut run, &vector_path).stage("read_vector")?;
    let alpha = a.alpha.unwrap_or(sv.config.alpha);
    run.set_config(serde_json::json!({
        "hidden": path_str(&hidden_path),
        "vector": path_str(&vector_path),
        "alpha": alpha,
        "out": path_str(&out),
    }));
    let hidden = run.read_tensor("hidden", &hidden_path).stage("read_hidden")?;
    if hidden.d() != sv.len() {
        return Err(Error::DimensionMismatch {
            expected: sv.len(),
            found: hidden.d(),
        })
        .stage("inject");
    }

    let mut data = Vec::with_capacity(hidden.n() * hidden.d());
    let mut worst = 0.0f64;
    let (mut cos_before, mut cos_after) = (0.0, 0.0);
    for row in hidden.rows() {
        let steered = inject(row, &sv, alpha).stage("inject")?;
        let n0 = l2_norm(row);
        worst = worst.max((l2_norm(&steered) - n0).abs() / n0);
        cos_before += cosine(row, &sv.values).unwrap_or(0.0);
        cos_after += cosine(&steered, &sv.values).unwrap_or(0.0);
        data.extend(steered);
    }
    let mut m = ActivationMatrix::new(hidden.n(), hidden.d(), data)?;
    m.inherit_tags(&hidden);
    m.role = hidden.role;
    m.vector = hidden.vector;
    m.extra = hidden.extra.clone();
    m.extra.insert("steering_alpha".into(), alpha.into());
    run.output("steered", &out, m.to_bytes(Precision::F64).stage("write_output")?)?;
    let n = hidden.n() as f64;
    run.result("rows", hidden.n());
    run.result("max_norm_relative_deviation", worst);
    run.result("mean_cosine_before", cos_before / n);
    run.result("mean_cosine_after", cos_after / n);
    Ok(run)
}

fn toy_params(
    run: &mut Run,
    net: Option<NetName>,
    toy_config: Option<&std::path::Path>,
) -> Result<ToyNetParams> {
    let config = match (net, toy_config) {
        (Some(NetName::Source), None) => ToyNetConfig::SOURCE,
        (Some(NetName::Target), None) => ToyNetConfig::TARGET,
        (None, Some(p)) => run.read_json::<ToyNetConfig>("toy_config", p)?,
        _ => return Err(usage("give exactly one of --net and --toy-config")),
    };
    ToyNetParams::generate(config)
}

pub fn toy_run(args: ToyRunArgs) -> Result<Run> {
    let opts = args.run.clone();
    let a = resolve(args, opts.config.as_deref()).stage("resolve_config")?;
    let tokens_path = required(a.tokens, "tokens").stage("resolve_config")?;
    let vector_path = required(a.vector, "vector").stage("resolve_config")?;
    let out = required(a.out, "out").stage("resolve_config")?;
    let mut run = Run::new("toy-run", opts.manifest);

    let params = toy_params(&mut run, a.net, a.toy_config.as_deref()).stage("load_net")?;
    let tokens: Vec<usize> = run.read_json("tokens", &tokens_path).stage("read_tokens")?;
    let sv = read_vector(&mut run, &vector_path).stage("read_vector")?;
    let alpha = a.alpha.unwrap_or(sv.config.alpha);
    let layer = a.layer.unwrap_or(sv.config.layer_target);
    let positions = a.positions.unwrap_or(sv.config.positions);
    run.set_config(serde_json::json!({
        "net": params.config,
        "tokens": path_str(&tokens_path),
        "vector": path_str(&vector_path),
        "alpha": alpha,
        "layer": layer,
        "positions": positions,
        "out": path_str(&out),
    }));
    if sv.len() != params.d() {
        return Err(Error::DimensionMismatch {
            expected: params.d(),
            found: sv.len(),
        })
        .stage("check_vector");
    }
    if layer as usize >= params.config.n_layers {
        return Err(Error::OutOfRange {
            what: "layer",
            value: layer as usize,
            min: 0,
            max: params.config.n_layers - 1,
        })
        .stage("check_vector");
    }

    let mut hook_cfg = sv.config.clone();
    hook_cfg.layer_target = layer;
    hook_cfg.alpha = alpha;
    hook_cfg.positions = positions;
    let hook = make_hook(sv, &hook_cfg).stage("make_hook")?;
    let base = toy_forward(&params, &tokens, None).stage("forward_baseline")?;
    let steered = toy_forward(&params, &tokens, Some(&hook)).stage("forward_steered")?;

    let distance = base
        .logits
        .iter()
        .zip(&steered.logits)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let l = layer as usize;
    let nb = l2_norm(&base.layer_states[l]);
    let ns = l2_norm(&steered.layer_states[l]);

    let mut header = vec!["run".to_string()];
    header.extend((0..params.config.vocab).map(|v| format!("logit_{v}")));
    let row = |name: &str, logits: &[f64]| {
        let mut r = vec![name.to_string()];
        r.extend(logits.iter().map(|&x| fmt_f64(x)));
        r
    };
    let table = vec![row("baseline", &base.logits), row("steered", &steered.logits)];
    run.output("logits_csv", &out, csv_bytes(&header, &table))?;
    run.result("l2_distance", distance);
    run.result("hidden_norm_baseline", nb);
    run.result("hidden_norm_steered", ns);
    run.result("hidden_norm_relative_difference", (ns - nb).abs() / nb);
    Ok(run)
}

pub fn toy_dump(args: ToyDumpArgs) -> Result<Run> {
    let opts = args.run.clone();
    let a = resolve(args, opts.config.as_deref()).stage("resolve_config")?;
    let layer = required(a.layer, "layer").stage("resolve_config")?;
    let out_pos = required(a.out_pos, "out_pos").stage("resolve_config")?;
    let out_neg = required(a.out_neg, "out_neg").stage("resolve_config")?;
    let n = a.n.unwrap_or(32);
    let qlen = a.question_len.unwrap_or(6);
    let seed = a.seed.unwrap_or(0);
    let mut run = Run::new("toy-dump", opts.manifest);

    let params = toy_params(&mut run, a.net, a.toy_config.as_deref()).stage("load_net")?;
    run.set_config(serde_json::json!({
        "net": params.config,
        "layer": layer,
        "n": n,
        "question_len": qlen,
        "seed": seed,
        "out_pos": path_str(&out_pos),
        "out_neg": path_str(&out_neg),
        "out_dirs": a.out_dirs.as_deref().map(path_str),
    }));
    let prompts = contrastive_prompts(n, qlen, params.config.vocab, seed).stage("prompts")?;
    let tag = format!("toy-contrastive-s{seed}");
    let mut pos = collect_final_states(&params, &prompts.positive, layer as usize, Role::Positive)
        .stage("forward")?;
    let mut neg = collect_final_states(&params, &prompts.negative, layer as usize, Role::Negative)
        .stage("forward")?;
    pos.prompt_set = Some(tag.clone());
    neg.prompt_set = Some(tag);
    run.output("positive", &out_pos, pos.to_bytes(Precision::F64)?)?;
    run.output("negative", &out_neg, neg.to_bytes(Precision::F64)?)?;
    if let Some(p) = &a.out_dirs {
        let dirs = l2v_core::latrep::direction_set(&pos, &neg).stage("direction_set")?;
        run.output("directions", p, dirs.matrix().to_bytes(Precision::F64)?)?;
        run.result("trace", covariance_trace(&dirs));
    }
    run.result("n", n);
    run.result("d", params.d());
    run.result("source_tag", params.config.tag());
    Ok(run)
}

pub fn drift(args: DriftArgs) -> Result<Run> {
    let opts = args.run.clone();
    let a = resolve(args, opts.config.as_deref()).stage("resolve_config")?;
    let clean_path = required(a.clean, "clean").stage("resolve_config")?;
    let noisy_path = required(a.noisy, "noisy").stage("resolve_config")?;
    let out = required(a.out, "out").stage("resolve_config")?;
    let mut run = Run::new("drift", opts.manifest);

    let clean: SynthSpec = run.read_json("clean_spec", &clean_path).stage("read_spec")?;
    let noisy: SynthSpec = run.read_json("noisy_spec", &noisy_path).stage("read_spec")?;
    let k = a.k.unwrap_or(clean.k_signal.max(noisy.k_signal));
    run.set_config(serde_json::json!({
        "clean": clean,
        "noisy": noisy,
        "k": k,
        "out": path_str(&out),
        "svg": a.svg.as_deref().map(path_str),
        "out_dirs": a.out_dirs.as_deref().map(path_str),
    }));
    let rep = drift_experiment(&clean, &noisy, k).stage("drift")?;

    let header: Vec<String> = ["set", "trace_raw", "trace_filtered"].iter().map(|s| s.to_string()).collect();
    let table = vec![
        vec!["clean".into(), fmt_f64(rep.trace_raw_clean), fmt_f64(rep.trace_filtered_clean)],
        vec!["noisy".into(), fmt_f64(rep.trace_raw_noisy), fmt_f64(rep.trace_filtered_noisy)],
    ];
    run.output("traces_csv", &out, csv_bytes(&header, &table))?;
    if let Some(svg) = &a.svg {
        let labels: Vec<String> = ["clean raw", "clean filtered", "noisy raw", "noisy filtered"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let vals = [
            rep.trace_raw_clean,
            rep.trace_filtered_clean,
            rep.trace_raw_noisy,
            rep.trace_filtered_noisy,
        ];
        run.output("traces_svg", svg, plot::bars("Covariance trace", "direction set", "trace", &labels, &vals).into_bytes())?;
    }
    if let Some(p) = &a.out_dirs {
        let set = synth_directions(&noisy).stage("drift")?;
        run.output("noisy_directions", p, set.matrix().to_bytes(Precision::F64)?)?;
    }
    run.result("report", rep);
    Ok(run)
}

pub fn dispatch(cmd: Command) -> Result<(Run, &'static str)> {
    let name = cmd.name();
    let run = match cmd {
        Command::Extract(a) => extract(a),
        Command::Analyze(a) => analyze(a),
        Command::Bands(a) => bands(a),
        Command::Steer(a) => steer(a),
        Command::ToyRun(a) => toy_run(a),
        Command::ToyDump(a) => toy_dump(a),
        Command::Drift(a) => drift(a),
    }?;
    Ok((run, name))
}

//! Command-line front door: model selection, the verification suites, the
//! experiment drivers, and machine-readable JSON/CSV reports.
//!
//! Exit codes: 0 on success, 1 when a verification suite fails, 2 on
//! validation errors (bad flags, bad input files).

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::chabauty::{
    convergence_experiment, geometric_kernel_ray, BallSpec,
};
use crate::decompose::{cartan_kak, iwasawa, polar};
use crate::error::Error;
use crate::limits::{
    build_limit_group, classify_sequence, member_defect, Classification, LimitGroupDescriptor,
};
use crate::model::{group_exp, serde_matrix, AlgebraElement, GroupElement, GroupModel, Tolerances};
use crate::polyhedral::{
    chart_continuity_experiment, corner_coords, phi, CompactifiedPoint, PolyhedralPoint,
};
use crate::report;
use crate::roots::{build_root_system, build_subset, root_system_report, RootSystem};
use crate::verify;

#[derive(Parser, Debug)]
#[command(name = "chabauty-lab", version, about = "Closed-subgroup degenerations of split matrix groups: decompositions, limit subgroups, subgroup-net distances, corner charts")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Model spec: sl:N or sopp:P.
    #[arg(long, default_value = "sl:3")]
    model: String,
    /// RNG seed; the CHABAUTY_LAB_SEED environment variable overrides it.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format for tabular payloads.
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    #[arg(long, default_value_t = 1e-9)]
    tol_factorization: f64,
    #[arg(long, default_value_t = 1e-7)]
    tol_membership: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_spectrum: f64,
}

#[derive(Args, Debug, Clone)]
struct BallArgs {
    /// Ball radius around the identity.
    #[arg(long, default_value_t = 6.0)]
    ball: f64,
    /// Target net resolution.
    #[arg(long, default_value_t = 0.15)]
    mesh: f64,
    /// Point budget per net.
    #[arg(long, default_value_t = 4000)]
    max_points: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the restricted root system of a model.
    Roots {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the invariant suites over the default or given models.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated model list; "default" runs sl:2..4 and sopp:2.
        #[arg(long, default_value = "default")]
        models: String,
    },
    /// Factor a group element and report the factors and residuals.
    Decompose {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_parser = ["iwasawa", "cartan", "polar"])]
        factorization: String,
        /// JSON file holding the matrix as rows of doubles.
        #[arg(long)]
        input: PathBuf,
        /// Use the opposite (lower-unipotent) variant of iwasawa.
        #[arg(long, default_value_t = false)]
        opposite: bool,
    },
    /// Build a limit group from a descriptor and report membership tests.
    LimitGroup {
        #[command(flatten)]
        common: CommonArgs,
        /// Subset of simple roots, e.g. "a12" or "a12,a23" or "empty".
        #[arg(long = "I")]
        subset: String,
        /// JSON file with the torus factor matrix; identity when omitted.
        #[arg(long)]
        a: Option<PathBuf>,
        /// JSON file with the compact factor matrix; identity when omitted.
        #[arg(long)]
        k: Option<PathBuf>,
        /// JSON files with probe matrices to test for membership.
        #[arg(long)]
        probe: Vec<PathBuf>,
    },
    /// Classify the degeneration of a conjugate sequence.
    Classify {
        #[command(flatten)]
        common: CommonArgs,
        /// JSON sequence spec file; see the README for the format.
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long, default_value_t = 12)]
        horizon: usize,
    },
    /// Distance table of conjugates of the compact subgroup against the
    /// limit group of a subset.
    Converge {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ball: BallArgs,
        /// Subset of simple roots, e.g. "a12" or "empty".
        #[arg(long = "I")]
        subset: String,
        /// Escape sequence spec: "geometric:RATIO".
        #[arg(long, default_value = "geometric:2")]
        sequence: String,
        #[arg(long, default_value_t = 12)]
        horizon: usize,
    },
    /// Corner charts and the chart-to-descriptor map.
    Polyhedral {
        #[command(subcommand)]
        command: PolyhedralCommand,
    },
}

#[derive(Subcommand, Debug)]
enum PolyhedralCommand {
    /// Chart coordinates of a torus element.
    Corner {
        #[command(flatten)]
        common: CommonArgs,
        /// JSON file with the torus element matrix.
        #[arg(long = "H")]
        h: PathBuf,
    },
    /// Canonical descriptor of a chart point conjugated by a group
    /// element.
    Phi {
        #[command(flatten)]
        common: CommonArgs,
        /// JSON file with the conjugating group element; identity when
        /// omitted.
        #[arg(long)]
        g: Option<PathBuf>,
        /// Subset of simple roots naming the facet.
        #[arg(long = "I")]
        subset: String,
        /// JSON file with the representative torus element; zero when
        /// omitted.
        #[arg(long = "H")]
        h: Option<PathBuf>,
    },
    /// Distance table along a convergent chart sequence.
    Continuity {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ball: BallArgs,
        /// JSON file with the chart sequence spec; see the README.
        #[arg(long)]
        spec: PathBuf,
    },
}

fn effective_seed(cli_seed: u64) -> u64 {
    std::env::var("CHABAUTY_LAB_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(cli_seed)
}

fn tolerances(common: &CommonArgs) -> Result<Tolerances, Error> {
    let tol = Tolerances {
        factorization_tol: common.tol_factorization,
        membership_tol: common.tol_membership,
        spectrum_tol: common.tol_spectrum,
    };
    tol.validate()?;
    Ok(tol)
}

/// Parse a subset spec: "empty"/"" for the empty set, otherwise a comma
/// list of simple-root names ("a12", "a23", ... for the special linear
/// model; "a1".."ap" for the split orthogonal model) or bare indices.
pub fn parse_subset(rs: &RootSystem, spec: &str) -> Result<BTreeSet<usize>, Error> {
    let spec = spec.trim();
    if spec.is_empty() || spec == "empty" || spec == "none" {
        return Ok(BTreeSet::new());
    }
    if spec == "full" {
        return Ok((0..rs.rank()).collect());
    }
    let mut out = BTreeSet::new();
    for token in spec.split(',') {
        let token = token.trim();
        let idx = if let Ok(i) = token.parse::<usize>() {
            i
        } else if let Some(rest) = token.strip_prefix('a') {
            match rs.model() {
                GroupModel::SpecialLinear { .. } => {
                    // a12 names the root comparing slots 1 and 2.
                    let digits: Vec<u32> = rest.chars().filter_map(|c| c.to_digit(10)).collect();
                    if digits.len() == 2 && digits[1] == digits[0] + 1 && digits[0] >= 1 {
                        (digits[0] - 1) as usize
                    } else if let Ok(i) = rest.parse::<usize>() {
                        i.checked_sub(1).ok_or(Error::InvalidSubset)?
                    } else {
                        return Err(Error::InvalidSubset);
                    }
                }
                GroupModel::SplitOrthogonal { .. } => {
                    let i: usize = rest.parse().map_err(|_| Error::InvalidSubset)?;
                    i.checked_sub(1).ok_or(Error::InvalidSubset)?
                }
            }
        } else {
            return Err(Error::InvalidSubset);
        };
        if idx >= rs.rank() {
            return Err(Error::InvalidSubset);
        }
        out.insert(idx);
    }
    Ok(out)
}

fn read_matrix(path: &PathBuf) -> Result<DMatrix<f64>, Error> {
    let text = std::fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)?;
    serde_matrix::from_rows(&rows).map_err(Error::Validation)
}

fn write_output(common: &CommonArgs, text: &str) -> Result<(), Error> {
    match &common.output {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn config_json(common: &CommonArgs, extra: Value) -> Value {
    json!({
        "model": common.model,
        "seed": effective_seed(common.seed),
        "tolerances": {
            "factorization": common.tol_factorization,
            "membership": common.tol_membership,
            "spectrum": common.tol_spectrum,
        },
        "extra": extra,
    })
}

/// Sequence spec formats accepted by `classify`:
/// `{"kind":"constant","element":M}`,
/// `{"kind":"explicit","elements":[M,...]}`,
/// `{"kind":"ray","direction":M,"scale":s,"left":M?,"right":M?}`.
fn read_sequence(
    model: &GroupModel,
    path: &PathBuf,
    horizon: usize,
    tol: &Tolerances,
) -> Result<Vec<GroupElement>, Error> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    let kind = value["kind"].as_str().unwrap_or("");
    let mat_at = |v: &Value| -> Result<DMatrix<f64>, Error> {
        let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone())?;
        serde_matrix::from_rows(&rows).map_err(Error::Validation)
    };
    match kind {
        "constant" => {
            let g = GroupElement::new(*model, mat_at(&value["element"])?, tol)?;
            Ok((0..horizon).map(|_| g.clone()).collect())
        }
        "explicit" => {
            let mats = value["elements"]
                .as_array()
                .ok_or_else(|| Error::validation("explicit spec needs `elements`"))?;
            mats.iter()
                .map(|m| GroupElement::new(*model, mat_at(m)?, tol))
                .collect()
        }
        "ray" => {
            let dir = AlgebraElement::new(*model, mat_at(&value["direction"])?, tol)?;
            let scale = value["scale"].as_f64().unwrap_or(1.0);
            let left = match value.get("left") {
                Some(v) if !v.is_null() => Some(GroupElement::new(*model, mat_at(v)?, tol)?),
                _ => None,
            };
            let right = match value.get("right") {
                Some(v) if !v.is_null() => Some(GroupElement::new(*model, mat_at(v)?, tol)?),
                _ => None,
            };
            (1..=horizon)
                .map(|n| {
                    let mut g = group_exp(&dir.scale(scale * n as f64));
                    if let Some(l) = &left {
                        g = l.mul(&g)?;
                    }
                    if let Some(r) = &right {
                        g = g.mul(r)?;
                    }
                    Ok(g)
                })
                .collect()
        }
        other => Err(Error::validation(format!("unknown sequence kind `{other}`"))),
    }
}

/// Chart sequence spec for `polyhedral continuity`:
/// `{"I":[...names or indices...],"coords":[[c1,...,cr],...]}` where each
/// row gives the finite corner coordinates (entries for roots outside I
/// are ignored and treated as infinite).
fn read_chart_sequence(
    rs: &RootSystem,
    path: &PathBuf,
    tol: &Tolerances,
) -> Result<Vec<PolyhedralPoint>, Error> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    let subset_spec = value["I"]
        .as_array()
        .ok_or_else(|| Error::validation("chart spec needs `I`"))?
        .iter()
        .map(|v| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()))
        .collect::<Vec<_>>()
        .join(",");
    let subset = parse_subset(rs, &subset_spec)?;
    let rows = value["coords"]
        .as_array()
        .ok_or_else(|| Error::validation("chart spec needs `coords`"))?;
    let mut out = Vec::new();
    for row in rows {
        let vals: Vec<f64> = serde_json::from_value(row.clone())?;
        if vals.len() != rs.rank() {
            return Err(Error::validation("coordinate row length must match the rank"));
        }
        let coords: Vec<crate::polyhedral::CornerCoord> = (0..rs.rank())
            .map(|i| {
                if subset.contains(&i) {
                    crate::polyhedral::CornerCoord::Finite(vals[i])
                } else {
                    crate::polyhedral::CornerCoord::Infinite
                }
            })
            .collect();
        out.push(crate::polyhedral::point_from_corner_coords(rs, &coords, tol)?);
    }
    Ok(out)
}

fn run_inner(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Roots { common } => {
            let model = GroupModel::parse(&common.model)?;
            let rs = build_root_system(&model);
            let config = config_json(&common, json!({}));
            let payload = root_system_report(&rs);
            let out = report::envelope(&common.model, "root-system-tables", &config, payload);
            write_output(&common, &serde_json::to_string_pretty(&out)?)?;
            Ok(0)
        }
        Command::Verify { common, models } => {
            let tol = tolerances(&common)?;
            let model_list: Vec<GroupModel> = if models == "default" {
                verify::default_models()
            } else {
                models
                    .split(',')
                    .map(GroupModel::parse)
                    .collect::<Result<_, _>>()?
            };
            let seed = effective_seed(common.seed);
            let results = verify::run_all(&model_list, &tol, seed);
            let all_passed = results.iter().all(|r| r.passed);
            let config = config_json(&common, json!({"models": models}));
            let payload = json!({
                "suites": results,
                "passed": all_passed,
            });
            let out = report::envelope(&common.model, "invariant-suites", &config, payload);
            write_output(&common, &serde_json::to_string_pretty(&out)?)?;
            Ok(if all_passed { 0 } else { 1 })
        }
        Command::Decompose {
            common,
            factorization,
            input,
            opposite,
        } => {
            let model = GroupModel::parse(&common.model)?;
            let tol = tolerances(&common)?;
            let rs = build_root_system(&model);
            let g = GroupElement::new(model, read_matrix(&input)?, &tol)?;
            let payload = match factorization.as_str() {
                "iwasawa" => {
                    let f = iwasawa(&g, opposite, &tol)?;
                    json!({
                        "k": serde_matrix::to_rows(&f.k.mat),
                        "a": serde_matrix::to_rows(&f.a.mat),
                        "n": serde_matrix::to_rows(&f.n.mat),
                        "opposite": f.opposite,
                        "residual": f.residual(&g),
                    })
                }
                "polar" => {
                    let (x, k) = polar(&g, &tol)?;
                    let recon = group_exp(&x).mul(&k)?;
                    json!({
                        "x": serde_matrix::to_rows(&x.mat),
                        "k": serde_matrix::to_rows(&k.mat),
                        "residual": crate::linalg::fro_dist(&recon.mat, &g.mat),
                    })
                }
                "cartan" => {
                    let f = cartan_kak(&rs, &g, &tol)?;
                    json!({
                        "k1": serde_matrix::to_rows(&f.k1.mat),
                        "a": serde_matrix::to_rows(&f.a.mat),
                        "k2": serde_matrix::to_rows(&f.k2.mat),
                        "residual": f.residual(&g),
                    })
                }
                _ => unreachable!("clap validates the factorization name"),
            };
            let config = config_json(&common, json!({"factorization": factorization}));
            let out = report::envelope(&common.model, "factorization", &config, payload);
            write_output(&common, &serde_json::to_string_pretty(&out)?)?;
            Ok(0)
        }
        Command::LimitGroup {
            common,
            subset,
            a,
            k,
            probe,
        } => {
            let model = GroupModel::parse(&common.model)?;
            let tol = tolerances(&common)?;
            let rs = build_root_system(&model);
            let subset_idx = parse_subset(&rs, &subset)?;
            let a_el = match &a {
                Some(p) => GroupElement::new(model, read_matrix(p)?, &tol)?,
                None => GroupElement::identity(model),
            };
            let k_el = match &k {
                Some(p) => GroupElement::new(model, read_matrix(p)?, &tol)?,
                None => GroupElement::identity(model),
            };
            let desc = LimitGroupDescriptor::new(&rs, subset_idx, a_el, k_el, &tol)?;
            let sg = build_limit_group(&rs, &desc)?;
            let mut probes = Vec::new();
            for p in &probe {
                let mat = read_matrix(p)?;
                let g = GroupElement::new(model, mat, &tol)?;
                let defect = member_defect(&g, &sg)?;
                probes.push(json!({
                    "file": p.display().to_string(),
                    "defect": defect,
                    "member": defect <= tol.membership_tol,
                }));
            }
            let payload = json!({
                "descriptor": desc.to_json(&rs),
                "m_count": sg.subset_data.m_elements.len(),
                "nilpotent_dim": sg.subset_data.n_lower_basis.len(),
                "compact_dim": sg.subset_data.k_upper_basis.len(),
                "probes": probes,
            });
            let config = config_json(&common, json!({"I": subset}));
            let out = report::envelope(&common.model, "limit-group-membership", &config, payload);
            write_output(&common, &serde_json::to_string_pretty(&out)?)?;
            Ok(0)
        }
        Command::Classify {
            common,
            sequence,
            horizon,
        } => {
            let model = GroupModel::parse(&common.model)?;
            let tol = tolerances(&common)?;
            let rs = build_root_system(&model);
            let seq = read_sequence(&model, &sequence, horizon, &tol)?;
            let payload = match classify_sequence(&rs, &seq, None, &tol)? {
                Classification::Interior => json!({"verdict": "interior"}),
                Classification::Boundary {
                    descriptor,
                    diagnostics,
                } => json!({
                    "verdict": "boundary",
                    "descriptor": descriptor.to_json(&rs),
                    "diagnostics": diagnostics,
                }),
            };
            let config = config_json(&common, json!({"horizon": horizon}));
            let out = report::envelope(&common.model, "degeneration-classification", &config, payload);
            write_output(&common, &serde_json::to_string_pretty(&out)?)?;
            Ok(0)
        }
        Command::Converge {
            common,
            ball,
            subset,
            sequence,
            horizon,
        } => {
            let model = GroupModel::parse(&common.model)?;
            let tol = tolerances(&common)?;
            let rs = build_root_system(&model);
            let subset_idx = parse_subset(&rs, &subset)?;
            let sd = build_subset(&rs, &subset_idx)?;
            let ratio = sequence
                .strip_prefix("geometric:")
                .and_then(|r| r.parse::<f64>().ok())
                .ok_or_else(|| Error::validation("sequence spec must be geometric:RATIO"))?;
            let ray = geometric_kernel_ray(&rs, &sd, ratio)?;
            let a_seq: Vec<GroupElement> = (1..=horizon)
                .map(|n| group_exp(&ray.scale(n as f64)))
                .collect();
            let ball_spec = BallSpec::new(ball.ball, ball.mesh, ball.max_points)?;
            let seed = effective_seed(common.seed);
            let (table, _nets, limit_net) =
                convergence_experiment(&rs, &sd, &a_seq, &ball_spec, seed, &tol)?;
            let config = config_json(
                &common,
                json!({"I": subset, "sequence": sequence, "horizon": horizon,
                       "ball": ball.ball, "mesh": ball.mesh, "max_points": ball.max_points}),
            );
            if common.format == "csv" {
                write_output(&common, &table.to_csv())?;
            } else {
                let payload = json!({
                    "table": table,
                    "final_distance": table.final_distance(),
                    "decreasing_from_step_4": table.decreasing_from(4),
                    "limit_net_points": limit_net.len(),
                    "limit_net_coverage": limit_net.coverage_estimate,
                });
                let out = report::envelope(&common.model, "conjugate-limit-convergence", &config, payload);
                write_output(&common, &serde_json::to_string_pretty(&out)?)?;
            }
            Ok(0)
        }
        Command::Polyhedral { command } => match command {
            PolyhedralCommand::Corner { common, h } => {
                let model = GroupModel::parse(&common.model)?;
                let tol = tolerances(&common)?;
                let rs = build_root_system(&model);
                let h_el = AlgebraElement::new(model, read_matrix(&h)?, &tol)?;
                let facet = crate::polyhedral::facet_of_vector(&rs, &h_el, &tol)?;
                let subset = crate::roots::facet_subset_of(&rs, &h_el, &tol)?;
                let p = PolyhedralPoint::new(&rs, (0..rs.rank()).collect(), &h_el, &tol)?;
                let coords = corner_coords(&rs, &p, &tol)?;
                let payload = json!({
                    "corner_coords": coords,
                    "chamber_facet": subset.iter().copied().collect::<Vec<_>>(),
                    "vanishing_roots": facet.sigma_zero.iter().map(|&i| rs.roots[i].coeffs.clone()).collect::<Vec<_>>(),
                    "span_dim": facet.span_basis.len(),
                });
                let config = config_json(&common, json!({}));
                let out = report::envelope(&common.model, "corner-chart", &config, payload);
                write_output(&common, &serde_json::to_string_pretty(&out)?)?;
                Ok(0)
            }
            PolyhedralCommand::Phi {
                common,
                g,
                subset,
                h,
            } => {
                let model = GroupModel::parse(&common.model)?;
                let tol = tolerances(&common)?;
                let rs = build_root_system(&model);
                let subset_idx = parse_subset(&rs, &subset)?;
                let g_el = match &g {
                    Some(p) => GroupElement::new(model, read_matrix(p)?, &tol)?,
                    None => GroupElement::identity(model),
                };
                let h_el = match &h {
                    Some(p) => AlgebraElement::new(model, read_matrix(p)?, &tol)?,
                    None => AlgebraElement::zero(model),
                };
                let pt = PolyhedralPoint::new(&rs, subset_idx, &h_el, &tol)?;
                let cp = CompactifiedPoint { g: g_el, pt };
                let (desc, residual) = phi(&rs, &cp, &tol)?;
                let payload = json!({
                    "descriptor": desc.to_json(&rs),
                    "canonicalization_residual": residual,
                });
                let config = config_json(&common, json!({"I": subset}));
                let out = report::envelope(&common.model, "chart-to-descriptor", &config, payload);
                write_output(&common, &serde_json::to_string_pretty(&out)?)?;
                Ok(0)
            }
            PolyhedralCommand::Continuity { common, ball, spec } => {
                let model = GroupModel::parse(&common.model)?;
                let tol = tolerances(&common)?;
                let rs = build_root_system(&model);
                let seq = read_chart_sequence(&rs, &spec, &tol)?;
                let ball_spec = BallSpec::new(ball.ball, ball.mesh, ball.max_points)?;
                let seed = effective_seed(common.seed);
                let table = chart_continuity_experiment(&rs, &seq, &ball_spec, seed, &tol)?;
                let config = config_json(
                    &common,
                    json!({"ball": ball.ball, "mesh": ball.mesh, "max_points": ball.max_points}),
                );
                if common.format == "csv" {
                    write_output(&common, &table.to_csv())?;
                } else {
                    let payload = json!({
                        "table": table,
                        "final_distance": table.final_distance(),
                    });
                    let out = report::envelope(&common.model, "chart-continuity", &config, payload);
                    write_output(&common, &serde_json::to_string_pretty(&out)?)?;
                }
                Ok(0)
            }
        },
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

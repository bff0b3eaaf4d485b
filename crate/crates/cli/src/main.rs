mod table;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use qexplain::causality::{self, ContingencyMode};
use qexplain::lineage::{self, ProbabilityAssignment};
use qexplain::model::io::{load_database, load_schema};
use qexplain::model::ConstraintSet;
use qexplain::query::{self, classify, parse, parse_constraints, UnionQuery};
use qexplain::rational::{self, Rational, RationalJson};
use qexplain::repairs::{self, RepairKind};
use qexplain::scores::{
    self, make_game, ApproxParams, GameFunction, GameKind, ScoreKind, ScoreReport,
};
use qexplain::{Database, Error, Tid};

use table::Table;

#[derive(Parser)]
#[command(name = "qexplain", version, about = "Explain query answers over relational data")]
struct Cli {
    /// Schema file (JSON); inferred from the data when absent.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,

    /// Data files: CSV named after the relation, or JSON {"P": [[...]]}.
    #[arg(long, global = true, num_args = 1..)]
    data: Vec<PathBuf>,

    /// Query program (datalog rules).
    #[arg(long, global = true)]
    query: Option<PathBuf>,

    /// Query to use when the program defines several.
    #[arg(long, global = true)]
    name: Option<String>,

    /// Integrity constraints (denial constraints and inclusion dependencies).
    #[arg(long, global = true)]
    ics: Option<PathBuf>,

    /// Comma-separated answer that turns an open query into a Boolean one.
    #[arg(long, global = true)]
    answer: Option<String>,

    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,

    /// Worker threads; results do not depend on it.
    #[arg(long, env = "QEXPLAIN_THREADS", global = true)]
    threads: Option<usize>,

    /// Cap on lineage variables for exact probabilities.
    #[arg(long, global = true, default_value_t = lineage::DEFAULT_MAX_VARS)]
    max_vars: usize,

    /// Cap on enumerated repairs.
    #[arg(long, global = true, default_value_t = repairs::DEFAULT_MAX_REPAIRS)]
    max_repairs: usize,

    /// Cap on players for exact Shapley and Banzhaf values.
    #[arg(long, global = true, default_value_t = scores::DEFAULT_MAX_PLAYERS)]
    max_players: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    S,
    C,
}

impl From<Kind> for RepairKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::S => RepairKind::S,
            Kind::C => RepairKind::C,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    Mc,
}

#[derive(clap::Args)]
struct Sampling {
    #[arg(long, default_value_t = MethodArg::Exact, value_enum)]
    method: MethodArg,
    /// Relative error bound for Monte Carlo.
    #[arg(long, value_parser = parse_rational)]
    epsilon: Option<Rational>,
    /// Failure probability for Monte Carlo.
    #[arg(long, value_parser = parse_rational)]
    delta: Option<Rational>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = scores::DEFAULT_MAX_SAMPLES)]
    max_samples: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Answers of the query.
    Eval,
    /// Lineage of a Boolean query (or of one answer).
    Lineage,
    /// Actual causes and their responsibility.
    Causes {
        /// Read causes off the repairs w.r.t. the query's denial constraints.
        #[arg(long)]
        via_repairs: bool,
    },
    /// Responsibility of one tuple.
    Resp {
        #[arg(long)]
        tid: String,
    },
    /// Subset or cardinality repairs w.r.t. the denial constraints in --ics.
    Repairs {
        #[arg(long, value_enum, default_value_t = Kind::S)]
        kind: Kind,
    },
    /// Consistent answers: those true in every repair.
    Cqa {
        #[arg(long, value_enum, default_value_t = Kind::S)]
        kind: Kind,
    },
    /// Causal effect under independent tuple probabilities.
    Ce {
        #[arg(long)]
        tid: Option<String>,
        /// Probability of every tuple.
        #[arg(long, value_parser = parse_rational)]
        prob: Option<Rational>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Shapley values.
    Shapley {
        #[arg(long)]
        tid: Option<String>,
        /// boolean, or sum:N, max:N, min:N, avg:N over 0-based head position N.
        #[arg(long, default_value = "boolean", value_parser = parse_game)]
        game: GameKind,
        /// Also compute the value with every tuple of the database as a player.
        #[arg(long)]
        full_database: bool,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Banzhaf indices (exact).
    Banzhaf {
        #[arg(long)]
        tid: Option<String>,
        #[arg(long, default_value = "boolean", value_parser = parse_game)]
        game: GameKind,
        #[arg(long)]
        full_database: bool,
    },
    /// Hierarchy and self-join analysis of each disjunct.
    Classify,
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    rational::parse_decimal(s).ok_or_else(|| format!("not a number: {s}"))
}

fn parse_game(s: &str) -> Result<GameKind, String> {
    if s == "boolean" {
        return Ok(GameKind::Boolean);
    }
    let (kind, pos) = s
        .split_once(':')
        .ok_or_else(|| format!("expected boolean or KIND:POSITION, got {s}"))?;
    let pos: usize = pos.parse().map_err(|_| format!("bad position in {s}"))?;
    match kind {
        "sum" => Ok(GameKind::Sum(pos)),
        "max" => Ok(GameKind::Max(pos)),
        "min" => Ok(GameKind::Min(pos)),
        "avg" => Ok(GameKind::Avg(pos)),
        _ => Err(format!("unknown game {kind}")),
    }
}

fn usage(kind: ErrorKind, msg: impl std::fmt::Display) -> ! {
    Cli::command().error(kind, msg).exit()
}

fn require_file(flag: &str, path: &Path) {
    if !path.is_file() {
        usage(
            ErrorKind::ValueValidation,
            format!("{flag}: no such file {}", path.display()),
        );
    }
}

struct Inputs<'a> {
    cli: &'a Cli,
    db: Database,
}

impl<'a> Inputs<'a> {
    fn load(cli: &'a Cli) -> Result<Self, Error> {
        if cli.data.is_empty() {
            usage(ErrorKind::MissingRequiredArgument, "--data is required");
        }
        for p in &cli.data {
            require_file("--data", p);
        }
        let schema = match &cli.schema {
            Some(p) => {
                require_file("--schema", p);
                Some(load_schema(p)?)
            }
            None => None,
        };
        let db = load_database(schema.as_ref(), &cli.data)?;
        Ok(Inputs { cli, db })
    }

    /// The query, instantiated with --answer when given.
    fn query(&self) -> Result<UnionQuery, Error> {
        let q = self.open_query()?;
        match &self.cli.answer {
            Some(a) => {
                let values: Vec<String> = a.split(',').map(|v| v.trim().to_string()).collect();
                q.instantiate(&values)
            }
            None => Ok(q),
        }
    }

    fn open_query(&self) -> Result<UnionQuery, Error> {
        let Some(path) = &self.cli.query else {
            usage(ErrorKind::MissingRequiredArgument, "--query is required");
        };
        require_file("--query", path);
        let program = parse(&std::fs::read_to_string(path)?)?;
        let q = match &self.cli.name {
            Some(n) => program.query(n).cloned().ok_or_else(|| {
                Error::InvalidParams(format!("no query named {n}"))
            })?,
            None => match program.queries.as_slice() {
                [q] => q.clone(),
                [] => return Err(Error::InvalidParams("the program defines no query".into())),
                _ => usage(
                    ErrorKind::MissingRequiredArgument,
                    "--name is required when the program defines several queries",
                ),
            },
        };
        q.check(self.db.schema())?;
        Ok(q)
    }

    fn constraints(&self) -> Result<Option<ConstraintSet>, Error> {
        match &self.cli.ics {
            Some(p) => {
                require_file("--ics", p);
                let cs = parse_constraints(&std::fs::read_to_string(p)?)?;
                for dc in &cs.dcs {
                    for a in dc.atoms() {
                        a.check(self.db.schema())?;
                    }
                }
                Ok(Some(cs))
            }
            None => Ok(None),
        }
    }

    fn denial_constraints(&self) -> Result<ConstraintSet, Error> {
        let Some(cs) = self.constraints()? else {
            usage(ErrorKind::MissingRequiredArgument, "--ics is required");
        };
        if !cs.inds.is_empty() {
            return Err(Error::InvalidParams(
                "repairs are defined for denial constraints only".into(),
            ));
        }
        Ok(cs)
    }

    fn tid(&self, tid: &str) -> Result<Tid, Error> {
        let tid = Tid::from(tid);
        self.db.require(&tid)?;
        Ok(tid)
    }

    fn tuple_text(&self, tid: &Tid) -> String {
        self.db.get(tid).map(|t| t.to_string()).unwrap_or_default()
    }
}

fn approx_params(s: &Sampling) -> Result<Option<ApproxParams>, Error> {
    if s.method == MethodArg::Exact {
        return Ok(None);
    }
    let (Some(e), Some(d)) = (&s.epsilon, &s.delta) else {
        usage(
            ErrorKind::MissingRequiredArgument,
            "--method mc requires --epsilon and --delta",
        );
    };
    ApproxParams::new(e.clone(), d.clone(), s.seed)?
        .with_max_samples(s.max_samples)
        .map(Some)
}

fn value_text(r: &Rational) -> String {
    format!("{} ({})", rational::display(r), rational::decimal(r))
}

fn tid_list(ts: &BTreeSet<Tid>) -> String {
    let names: Vec<&str> = ts.iter().map(Tid::as_str).collect();
    format!("{{{}}}", names.join(","))
}

enum Output {
    Json(Value),
    Table(Table),
}

fn to_json<T: Serialize>(v: &T) -> Result<Value, Error> {
    Ok(serde_json::to_value(v)?)
}

fn run(cli: &Cli) -> Result<Output, Error> {
    let inputs = Inputs::load(cli)?;
    let db = &inputs.db;
    let table = cli.format == Format::Table;

    match &cli.command {
        Command::Eval => {
            let q = inputs.query()?;
            let answers = query::evaluate(&q, db)?;
            if table {
                let mut t = Table::new((1..=q.arity()).map(|i| format!("X{i}")).collect());
                if q.is_boolean() {
                    t = Table::new(vec!["holds".into()]);
                    t.row(vec![(!answers.is_empty()).to_string()]);
                }
                for a in &answers {
                    if !a.is_empty() {
                        t.row(a.clone());
                    }
                }
                return Ok(Output::Table(t));
            }
            Ok(Output::Json(if q.is_boolean() {
                json!({"query": q.name(), "holds": !answers.is_empty()})
            } else {
                json!({"query": q.name(), "answers": answers})
            }))
        }

        Command::Lineage => {
            let q = inputs.query()?;
            let f = lineage::build_lineage(&q, db)?;
            if table {
                let mut t = Table::new(vec!["clause".into(), "tuples".into()]);
                for c in f.clauses() {
                    let tuples: Vec<String> = c.iter().map(|x| inputs.tuple_text(x)).collect();
                    t.row(vec![tid_list(c), tuples.join(", ")]);
                }
                return Ok(Output::Table(t));
            }
            Ok(Output::Json(json!({
                "query": q.name(),
                "formula": f.to_string(),
                "clauses": f.clauses(),
                "variables": f.variables(),
            })))
        }

        Command::Causes { via_repairs } => {
            let q = inputs.query()?;
            let ics = inputs.constraints()?;
            let reports = if *via_repairs {
                if ics.is_some() {
                    usage(
                        ErrorKind::ArgumentConflict,
                        "--via-repairs cannot be combined with --ics",
                    );
                }
                repairs::causes_via_repairs_capped(db, &q, cli.max_repairs)?
            } else {
                causality::find_causes(db, &q, ics.as_ref())?
            };
            if table {
                let mut t = Table::new(
                    ["tid", "tuple", "actual", "counterfactual", "responsibility", "contingencies"]
                        .map(String::from)
                        .to_vec(),
                );
                for r in &reports {
                    let sets: Vec<String> =
                        r.minimal_contingencies.iter().map(|c| tid_list(&c.tids)).collect();
                    t.row(vec![
                        r.tid.to_string(),
                        inputs.tuple_text(&r.tid),
                        r.is_actual.to_string(),
                        r.is_counterfactual.to_string(),
                        value_text(&r.responsibility),
                        sets.join(" "),
                    ]);
                }
                return Ok(Output::Table(t));
            }
            Ok(Output::Json(to_json(&reports)?))
        }

        Command::Resp { tid } => {
            let q = inputs.query()?;
            let ics = inputs.constraints()?;
            let tid = inputs.tid(tid)?;
            let sets = causality::contingency_sets(db, &q, &tid, ics.as_ref(), ContingencyMode::Minimum)?;
            let resp = match sets.first() {
                Some(s) => rational::ratio(1, s.len() as i64 + 1),
                None => rational::zero(),
            };
            if table {
                let mut t = Table::new(
                    ["tid", "tuple", "responsibility", "minimum contingencies"]
                        .map(String::from)
                        .to_vec(),
                );
                let sets: Vec<String> = sets.iter().map(|c| tid_list(&c.tids)).collect();
                t.row(vec![
                    tid.to_string(),
                    inputs.tuple_text(&tid),
                    value_text(&resp),
                    sets.join(" "),
                ]);
                return Ok(Output::Table(t));
            }
            Ok(Output::Json(json!({
                "tid": tid,
                "responsibility": RationalJson(resp),
                "minimum_contingencies": sets,
            })))
        }

        Command::Repairs { kind } => {
            let cs = inputs.denial_constraints()?;
            let set = repairs::repairs(db, &cs.dcs, (*kind).into(), cli.max_repairs)?;
            if table {
                let mut t = Table::new(vec!["repair".into(), "removed".into()]);
                for (i, r) in set.repairs.iter().enumerate() {
                    t.row(vec![(i + 1).to_string(), tid_list(&r.removed)]);
                }
                return Ok(Output::Table(t));
            }
            Ok(Output::Json(to_json(&set)?))
        }

        Command::Cqa { kind } => {
            let q = inputs.query()?;
            let cs = inputs.denial_constraints()?;
            let kind: RepairKind = (*kind).into();
            let answers = repairs::consistent_answers_capped(db, &cs.dcs, &q, kind, cli.max_repairs)?;
            if table {
                let mut t = Table::new(if q.is_boolean() {
                    vec!["holds".into()]
                } else {
                    (1..=q.arity()).map(|i| format!("X{i}")).collect()
                });
                if q.is_boolean() {
                    t.row(vec![(!answers.is_empty()).to_string()]);
                } else {
                    answers.iter().for_each(|a| t.row(a.clone()));
                }
                return Ok(Output::Table(t));
            }
            Ok(Output::Json(if q.is_boolean() {
                json!({"query": q.name(), "kind": kind, "holds": !answers.is_empty()})
            } else {
                json!({"query": q.name(), "kind": kind, "answers": answers})
            }))
        }

        Command::Ce { tid, prob, sampling } => {
            let q = inputs.query()?;
            q.require_boolean()?;
            let params = approx_params(sampling)?;
            let p = match prob {
                Some(p) => ProbabilityAssignment::uniform(db, p.clone())?,
                None => ProbabilityAssignment::for_database(db),
            };
            let f = lineage::build_lineage(&q, db)?;
            let vars = f.variables();
            let tids: Vec<Tid> = match tid {
                Some(t) => vec![inputs.tid(t)?],
                None => vars.iter().cloned().collect(),
            };
            let reports = tids
                .into_iter()
                .map(|t| match &params {
                    None => {
                        let v = scores::causal_effect_capped(db, &q, &t, Some(&p), cli.max_vars)?;
                        Ok(ScoreReport::exact(t, ScoreKind::Ce, v, vars.len(), db.len()))
                    }
                    Some(params) => {
                        let e = scores::causal_effect_mc(db, &q, &t, Some(&p), params)?;
                        Ok(ScoreReport::estimated(t, ScoreKind::Ce, e, params, vars.len(), db.len()))
                    }
                })
                .collect::<Result<Vec<_>, Error>>()?;
            score_output(&inputs, reports, table)
        }

        Command::Shapley {
            tid,
            game,
            full_database,
            sampling,
        } => {
            let params = approx_params(sampling)?;
            let g = game_for(&inputs, *game)?;
            player_scores(&inputs, &g, tid.as_deref(), ScoreKind::Shapley, params, *full_database)
        }

        Command::Banzhaf {
            tid,
            game,
            full_database,
        } => {
            let g = game_for(&inputs, *game)?;
            player_scores(&inputs, &g, tid.as_deref(), ScoreKind::Banzhaf, None, *full_database)
        }

        Command::Classify => {
            let q = inputs.query()?;
            q.require_boolean()?;
            let results = q
                .disjuncts()
                .iter()
                .map(|d| {
                    let c = classify(d)?;
                    Ok((d.to_string(), c))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            if table {
                let mut t = Table::new(
                    ["rule", "hierarchical", "self_join_free", "shapley_tractable"]
                        .map(String::from)
                        .to_vec(),
                );
                for (rule, c) in &results {
                    t.row(vec![
                        rule.clone(),
                        c.hierarchical.to_string(),
                        c.self_join_free.to_string(),
                        c.shapley_tractable()
                            .map_or("unknown".to_string(), |b| b.to_string()),
                    ]);
                }
                return Ok(Output::Table(t));
            }
            let items: Vec<Value> = results
                .iter()
                .map(|(rule, c)| {
                    json!({
                        "rule": rule,
                        "hierarchical": c.hierarchical,
                        "self_join_free": c.self_join_free,
                        "shapley_tractable": c.shapley_tractable(),
                        "atoms_of": c.atoms_of,
                    })
                })
                .collect();
            Ok(Output::Json(match <[Value; 1]>::try_from(items) {
                Ok([one]) => one,
                Err(items) => Value::Array(items),
            }))
        }
    }
}

fn game_for(inputs: &Inputs, kind: GameKind) -> Result<GameFunction, Error> {
    let q = if kind == GameKind::Boolean {
        inputs.query()?
    } else {
        inputs.open_query()?
    };
    make_game(&q, kind)
}

fn player_scores(
    inputs: &Inputs,
    g: &GameFunction,
    tid: Option<&str>,
    kind: ScoreKind,
    params: Option<ApproxParams>,
    full_database: bool,
) -> Result<Output, Error> {
    let db = &inputs.db;
    let cap = inputs.cli.max_players;
    let relevant = scores::relevant_tuples(db, g)?;
    let tids = match tid {
        Some(t) => vec![inputs.tid(t)?],
        None => relevant.clone(),
    };
    let mut reports = Vec::with_capacity(tids.len());
    for t in tids {
        let mut report = match (&params, kind) {
            (Some(params), _) => {
                let e = scores::shapley_mc(db, g, &t, params)?;
                ScoreReport::estimated(t.clone(), kind, e, params, relevant.len(), db.len())
            }
            (None, ScoreKind::Banzhaf) => {
                let v = scores::banzhaf_capped(db, g, &t, cap)?;
                ScoreReport::exact(t.clone(), kind, v, relevant.len(), db.len())
            }
            (None, _) => {
                let v = scores::shapley_capped(db, g, &t, cap)?;
                ScoreReport::exact(t.clone(), kind, v, relevant.len(), db.len())
            }
        };
        if full_database {
            report.value_full_database = Some(match kind {
                ScoreKind::Banzhaf => scores::banzhaf_full_database(db, g, &t, cap)?,
                _ => scores::shapley_full_database(db, g, &t, cap)?,
            });
        }
        reports.push(report);
    }
    score_output(inputs, reports, inputs.cli.format == Format::Table)
}

fn score_output(inputs: &Inputs, mut reports: Vec<ScoreReport>, table: bool) -> Result<Output, Error> {
    reports.sort_by(|a, b| a.tid.cmp(&b.tid));
    if !table {
        return Ok(Output::Json(to_json(&reports)?));
    }
    let mut t = Table::new(
        ["tid", "tuple", "score", "value", "method", "samples"]
            .map(String::from)
            .to_vec(),
    );
    for r in &reports {
        t.row(vec![
            r.tid.to_string(),
            inputs.tuple_text(&r.tid),
            to_json(&r.score)?.as_str().unwrap_or_default().to_string(),
            value_text(&r.value),
            to_json(&r.method)?.as_str().unwrap_or_default().to_string(),
            r.sampling.as_ref().map_or(String::new(), |s| s.samples.to_string()),
        ]);
    }
    Ok(Output::Table(t))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            usage(ErrorKind::ValueValidation, "--threads must be positive");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match run(&cli) {
        Ok(Output::Json(v)) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
            ExitCode::SUCCESS
        }
        Ok(Output::Table(t)) => {
            print!("{t}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(1)
        }
    }
}

//! Command-line front end: parameter generation, user registration and the
//! analysis scenarios.

pub mod config;
pub mod files;
pub mod scenario;
pub mod transcript;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ksauth_core::harness::{register_user, Clock, HarnessError};
use ksauth_core::server::{DbError, UserDb};
use ksauth_core::{
    generate_params, AuthServer, CryptoError, Identity, ReplayMode, ReplayPolicy, ServerError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

pub use config::ScenarioConfig;
pub use scenario::{run_scenario, write_outputs, Scenario, ScenarioRun};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("unknown scenario {0:?} (expected honest, faulty-login, replay or cache-bench)")]
    UnknownScenario(String),
    #[error("cannot write {0}: {1}")]
    FileWrite(PathBuf, #[source] std::io::Error),
    #[error("cannot read {0}: {1}")]
    FileRead(PathBuf, #[source] std::io::Error),
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Db(#[from] DbError),
}

#[derive(Debug, Parser)]
#[command(name = "ksauth", version, about = "Smart-card authentication scheme analysis harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate server parameters into the output directory.
    Keygen(CommonArgs),
    /// Register a user against saved parameters and write their card.
    Register {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        id: String,
        #[arg(long)]
        password: String,
    },
    /// Run a scenario and write its report and transcript.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        scenario: String,
        /// Directory holding params.pub and params.sec; generated from the
        /// seed when absent.
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub policy: Option<ReplayMode>,
    #[arg(long)]
    pub id_s_known: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub prime_bits: Option<u32>,
    #[arg(long)]
    pub digest_width: Option<usize>,
    #[arg(long)]
    pub id_width: Option<usize>,
    #[arg(long)]
    pub delta_t: Option<u64>,
    #[arg(long)]
    pub recorded_sessions: Option<usize>,
    #[arg(long)]
    pub replay_from: Option<usize>,
}

impl CommonArgs {
    /// Config file (or defaults) with flags applied on top.
    pub fn resolve(&self) -> Result<ScenarioConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        macro_rules! apply {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { config.$field = v; })*
            };
        }
        apply!(
            seed => seed,
            trials => trials,
            policy => replay_policy,
            out => output_path,
            prime_bits => prime_bits,
            digest_width => digest_width,
            id_width => id_width,
            delta_t => delta_t,
            recorded_sessions => recorded_sessions,
            replay_from => replay_from,
        );
        if self.id_s_known.is_some() {
            config.id_s_known = self.id_s_known;
        }
        config.validate()?;
        Ok(config)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::FileRead(path.to_path_buf(), e))
}

fn write(path: &Path, data: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, data).map_err(|e| CliError::FileWrite(path.to_path_buf(), e))
}

/// Loads `params.pub` and `params.sec` from `dir`.
pub fn load_params_dir(dir: &Path, seed: u64) -> Result<scenario::LoadedParams, CliError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    files::load_params(
        &read(&dir.join(files::PUBLIC_FILE))?,
        &read(&dir.join(files::SECRET_FILE))?,
        &mut rng,
    )
}

/// Generates parameters and a server identity from the seed and writes
/// `params.pub` / `params.sec` into the output directory. Returns the public
/// file's contents.
pub fn cmd_keygen(config: &ScenarioConfig) -> Result<ksauth_core::PublicParams, CliError> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let (public, secret) = generate_params(config.prime_bits, &mut rng)?;
    let public = public.with_id_width(config.id_width)?;
    let id_s = Identity::random(&mut rng, public.id_width);

    let dir = &config.output_path;
    std::fs::create_dir_all(dir).map_err(|e| CliError::FileWrite(dir.clone(), e))?;
    write(&dir.join(files::PUBLIC_FILE), &files::encode_public(&public))?;
    write(&dir.join(files::SECRET_FILE), &files::encode_secret(&secret, &id_s))?;
    Ok(public)
}

/// Registers `id` with the parameters in the output directory, appending to
/// `users.ksdb` and writing `<id>.kscard`. Returns the card path.
pub fn cmd_register(
    config: &ScenarioConfig,
    id: &str,
    password: &str,
) -> Result<PathBuf, CliError> {
    let dir = &config.output_path;
    let (public, secret, id_s) = load_params_dir(dir, config.seed)?;
    let id = Identity::new(id.as_bytes(), public.id_width)
        .map_err(|e| CliError::ConfigInvalid(format!("identity: {e}")))?;
    if password.is_empty() {
        return Err(CliError::ConfigInvalid("password must not be empty".into()));
    }
    let mut server = AuthServer::new(public, secret, id_s, ReplayPolicy::new(ReplayMode::None))?;
    let db_path = dir.join(files::DB_FILE);
    if db_path.exists() {
        server.replace_db(UserDb::from_bytes(&read(&db_path)?)?);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut clock = Clock::default();
    let user = register_user(&mut server, id, password.as_bytes(), &mut clock, &mut rng)?;

    write(&db_path, &server.db().to_bytes())?;
    let card_path = dir.join(format!("{}.kscard", hex::encode(user.id.raw())));
    write(&card_path, &files::encode_card(&user.card))?;
    Ok(card_path)
}

/// Runs a scenario and writes its outputs.
pub fn cmd_run(
    scenario: &str,
    config: &ScenarioConfig,
    params_dir: Option<&Path>,
) -> Result<ScenarioRun, CliError> {
    let scenario: Scenario = scenario.parse()?;
    let params = params_dir.map(|dir| load_params_dir(dir, config.seed)).transpose()?;
    let run = run_scenario(scenario, config, params)?;
    write_outputs(&run, &config.output_path)?;
    Ok(run)
}

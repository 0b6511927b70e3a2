//! Agent checkpoints.
//!
//! ```text
//! magic        8 bytes  "PAVECKPT"
//! version      u32      1
//! step         u64      environment steps taken
//! config_hash  u64      first 8 bytes (LE) of SHA-256 over the config snapshot
//! state_dim    u32
//! action_dim   u32
//! max_action   f64
//! networks     6 parameter containers (see `autodiff::io`): actor,
//!              actor target, critic 1, critic 2, critic 1 target, critic 2 target
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::agent::{Td3Agent, Td3Config};
use crate::autodiff::io::{read_exact, read_params, write_params};
use crate::autodiff::{ActorNetwork, CriticNetwork};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PAVECKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub config_hash: u64,
    pub actor: ActorNetwork,
    pub actor_target: ActorNetwork,
    pub critics: [CriticNetwork; 2],
    pub critic_targets: [CriticNetwork; 2],
}

pub fn config_hash(snapshot: &str) -> u64 {
    let digest = Sha256::digest(snapshot.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

impl Checkpoint {
    pub fn from_agent(agent: &Td3Agent, step: u64, config_hash: u64) -> Self {
        Self {
            step,
            config_hash,
            actor: agent.actor.clone(),
            actor_target: agent.actor_target.clone(),
            critics: agent.critics.clone(),
            critic_targets: agent.critic_targets.clone(),
        }
    }

    /// Rebuild an agent with fresh optimizer state.
    pub fn into_agent(self, cfg: Td3Config) -> Td3Agent {
        let mut agent = Td3Agent::from_networks(cfg, self.actor, self.critics);
        agent.actor_target = self.actor_target;
        agent.critic_targets = self.critic_targets;
        agent
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        let io = |e| Error::io("<checkpoint>", e);
        w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&self.step.to_le_bytes()).map_err(io)?;
        w.write_all(&self.config_hash.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.actor.state_dim() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.actor.action_dim() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&self.actor.max_action().to_le_bytes()).map_err(io)?;
        write_params(w, self.actor.params())?;
        write_params(w, self.actor_target.params())?;
        for c in self.critics.iter().chain(&self.critic_targets) {
            write_params(w, c.params())?;
        }
        Ok(())
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        if &read_exact::<8>(r)? != CHECKPOINT_MAGIC {
            return Err(Error::Decode("bad checkpoint magic".into()));
        }
        let version = u32::from_le_bytes(read_exact(r)?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Decode(format!("unsupported checkpoint version {version}")));
        }
        let step = u64::from_le_bytes(read_exact(r)?);
        let config_hash = u64::from_le_bytes(read_exact(r)?);
        let k = u32::from_le_bytes(read_exact(r)?) as usize;
        let d = u32::from_le_bytes(read_exact(r)?) as usize;
        let max_action = f64::from_le_bytes(read_exact(r)?);
        let actor = ActorNetwork::from_params(k, d, max_action, read_params(r)?)?;
        let actor_target = ActorNetwork::from_params(k, d, max_action, read_params(r)?)?;
        let mut critic = || -> Result<CriticNetwork> { CriticNetwork::from_params(k, d, read_params(r)?) };
        let critics = [critic()?, critic()?];
        let critic_targets = [critic()?, critic()?];
        Ok(Self {
            step,
            config_hash,
            actor,
            actor_target,
            critics,
            critic_targets,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(&mut BufReader::new(f)).map_err(|e| match e {
            Error::Decode(reason) => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }
}

//! Single-file agent container.
//!
//! ```text
//! magic     4 bytes "RBAG"
//! version   u32
//! manifest  u32 length, then UTF-8 JSON
//! blobs     network (RBNN) and optimizer (RBAD) records back to back
//! ```
//!
//! The manifest echoes the agent configuration and lists every blob with its
//! byte offset (relative to the first blob) and length.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Agent, AgentConfig};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_u32, write_u32};
use crate::nn::{Adam, Network};
use crate::rules::ActionSpace;

const MAGIC: &[u8; 4] = b"RBAG";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: String,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: AgentConfig,
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    pub critic_updates: u64,
    pub actor_updates: u64,
    pub entries: Vec<ManifestEntry>,
}

const NETWORKS: [&str; 6] = [
    "actor",
    "actor_target",
    "critic1",
    "critic2",
    "critic1_target",
    "critic2_target",
];
const OPTIMIZERS: [&str; 3] = ["actor_opt", "critic1_opt", "critic2_opt"];

impl Agent {
    fn networks(&self) -> [&Network; 6] {
        [
            &self.actor,
            &self.actor_target,
            &self.critics[0],
            &self.critics[1],
            &self.critic_targets[0],
            &self.critic_targets[1],
        ]
    }

    pub fn write_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut blobs = Vec::new();
        let mut entries = Vec::new();
        for (name, net) in NETWORKS.iter().zip(self.networks()) {
            let start = blobs.len() as u64;
            net.write_to(&mut blobs)?;
            entries.push(ManifestEntry {
                name: name.to_string(),
                kind: "network".into(),
                offset: start,
                length: blobs.len() as u64 - start,
            });
        }
        let opts = [&self.actor_opt, &self.critic_opts[0], &self.critic_opts[1]];
        for (name, opt) in OPTIMIZERS.iter().zip(opts) {
            let start = blobs.len() as u64;
            opt.write_to(&mut blobs)?;
            entries.push(ManifestEntry {
                name: name.to_string(),
                kind: "optimizer".into(),
                offset: start,
                length: blobs.len() as u64 - start,
            });
        }
        let manifest = Manifest {
            config: self.config.clone(),
            obs_dim: self.obs_dim,
            action_space: self.space.clone(),
            critic_updates: self.critic_updates,
            actor_updates: self.actor_updates,
            entries,
        };
        let json = serde_json::to_vec_pretty(&manifest)?;
        w.write_all(MAGIC)?;
        write_u32(w, VERSION)?;
        write_u32(w, json.len() as u32)?;
        w.write_all(&json)?;
        w.write_all(&blobs)?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not an agent checkpoint".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported agent version {version}"
            )));
        }
        let len = read_u32(r)? as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let manifest: Manifest = serde_json::from_slice(&json)?;
        let mut blobs = Vec::new();
        r.read_to_end(&mut blobs)?;

        let blob = |name: &str| -> Result<&[u8]> {
            let e = manifest
                .entries
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::Checkpoint(format!("manifest lacks `{name}`")))?;
            let (start, end) = (e.offset as usize, (e.offset + e.length) as usize);
            blobs
                .get(start..end)
                .ok_or_else(|| Error::Checkpoint(format!("blob `{name}` out of range")))
        };
        let net = |name: &str| -> Result<Network> { Network::from_bytes(blob(name)?) };
        let opt = |name: &str| -> Result<Adam> { Adam::read_from(&mut blob(name)?) };

        let agent = Agent {
            actor: net("actor")?,
            actor_target: net("actor_target")?,
            critics: [net("critic1")?, net("critic2")?],
            critic_targets: [net("critic1_target")?, net("critic2_target")?],
            actor_opt: opt("actor_opt")?,
            critic_opts: [opt("critic1_opt")?, opt("critic2_opt")?],
            config: manifest.config,
            space: manifest.action_space,
            obs_dim: manifest.obs_dim,
            critic_updates: manifest.critic_updates,
            actor_updates: manifest.actor_updates,
        };
        let act = agent.space.dim();
        if agent.actor.input_width() != agent.obs_dim
            || agent.actor.output_width() != act
            || agent
                .critics
                .iter()
                .any(|c| c.input_width() != agent.obs_dim + act)
            || !agent.actor.same_architecture(&agent.actor_target)
            || !agent.critics[0].same_architecture(&agent.critic_targets[0])
            || !agent.critics[1].same_architecture(&agent.critic_targets[1])
        {
            return Err(Error::Checkpoint(
                "network shapes disagree with manifest".into(),
            ));
        }
        Ok(agent)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_checkpoint(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Agent::read_checkpoint(&mut f)
    }
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use solarec::clustering::ClusterModel;
use solarec::community::CommunityState;
use solarec::profiles::{ConsumerDataset, ConsumptionRecord, ProfileError};
use solarec::recommender::AdmissionPolicy;

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("snapshot {path} is not valid JSON: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("snapshot candidate `{candidate_id}`: {source}")]
    Candidate { candidate_id: String, source: ProfileError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredCandidate {
    pub candidate_id: String,
    pub records: Vec<ConsumptionRecord>,
}

impl StoredCandidate {
    pub fn from_dataset(dataset: &ConsumerDataset) -> Self {
        Self { candidate_id: dataset.consumer_id.clone(), records: dataset.records().to_vec() }
    }

    pub fn to_dataset(&self) -> Result<ConsumerDataset, SnapshotError> {
        ConsumerDataset::new(self.candidate_id.clone(), self.records.clone())
            .map_err(|source| SnapshotError::Candidate { candidate_id: self.candidate_id.clone(), source })
    }
}

/// Everything needed to restart the service at a committed revision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub revision: u64,
    pub community: CommunityState,
    pub model: ClusterModel,
    pub policy: AdmissionPolicy,
    pub candidates: Vec<StoredCandidate>,
}

impl Snapshot {
    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        let text = fs::read_to_string(path).map_err(|source| SnapshotError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| SnapshotError::Parse { path: path.into(), source })
    }

    /// Writes to a sibling temp file, syncs it, then renames it over `path`.
    pub fn write_atomic(&self, path: &Path) -> Result<(), SnapshotError> {
        let io = |source| SnapshotError::Io { path: path.into(), source };
        let text = solarec::json::to_canonical_string(self).map_err(|e| io(std::io::Error::other(e)))?;
        let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "snapshot".into());
        tmp_name.push(".tmp");
        let tmp = path.with_file_name(tmp_name);
        {
            let mut file = fs::File::create(&tmp).map_err(io)?;
            file.write_all(text.as_bytes()).map_err(io)?;
            file.sync_all().map_err(io)?;
        }
        fs::rename(&tmp, path).map_err(io)
    }
}

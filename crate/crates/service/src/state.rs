use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use solarec::clustering::ClusterModel;
use solarec::community::{simulate, CommunityState, SharingReport};
use solarec::profiles::ConsumerDataset;
use solarec::recommender::{AdmissionPolicy, Recommendation, RecommendError};

use crate::error::ApiError;
use crate::snapshot::{Snapshot, SnapshotError, StoredCandidate};

/// One committed revision. Cloning is cheap.
#[derive(Debug, Clone)]
pub(crate) struct Committed {
    pub revision: u64,
    pub community: Arc<CommunityState>,
    pub model: Arc<ClusterModel>,
    pub policy: Arc<AdmissionPolicy>,
    pub candidates: Arc<BTreeMap<String, Arc<ConsumerDataset>>>,
    pub report: Arc<SharingReport>,
}

impl Committed {
    fn snapshot(&self) -> Snapshot {
        Snapshot {
            revision: self.revision,
            community: (*self.community).clone(),
            model: (*self.model).clone(),
            policy: (*self.policy).clone(),
            candidates: self.candidates.values().map(|d| StoredCandidate::from_dataset(d)).collect(),
        }
    }
}

struct Shared {
    current: RwLock<Committed>,
    // what-if results keyed by candidate, tagged with the revision they were computed at
    whatif: Mutex<HashMap<String, (u64, Recommendation)>>,
    snapshot_path: PathBuf,
}

#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

/// What a mutation wants the next revision to look like.
pub(crate) struct Change {
    pub community: Option<CommunityState>,
    pub candidates: BTreeMap<String, Arc<ConsumerDataset>>,
}

impl AppState {
    /// Starts at revision 0 and writes the initial snapshot.
    pub fn new(
        community: CommunityState,
        model: ClusterModel,
        policy: AdmissionPolicy,
        snapshot_path: impl Into<PathBuf>,
    ) -> Result<Self, ApiError> {
        let snapshot = Snapshot { revision: 0, community, model, policy, candidates: Vec::new() };
        let state = Self::from_parts(snapshot, snapshot_path.into())?;
        state.read().snapshot().write_atomic(&state.shared.snapshot_path)?;
        Ok(state)
    }

    /// Resumes from a snapshot written by a previous run.
    pub fn from_snapshot(path: impl AsRef<Path>) -> Result<Self, ApiError> {
        let path = path.as_ref();
        Self::from_parts(Snapshot::load(path)?, path.to_path_buf())
    }

    fn from_parts(snapshot: Snapshot, snapshot_path: PathBuf) -> Result<Self, ApiError> {
        snapshot.policy.validate()?;
        snapshot.model.validate().map_err(RecommendError::from)?;
        let report = simulate(&snapshot.community).map_err(RecommendError::from)?;
        let candidates = snapshot
            .candidates
            .iter()
            .map(|c| Ok((c.candidate_id.clone(), Arc::new(c.to_dataset()?))))
            .collect::<Result<BTreeMap<_, _>, SnapshotError>>()?;
        let committed = Committed {
            revision: snapshot.revision,
            community: Arc::new(snapshot.community),
            model: Arc::new(snapshot.model),
            policy: Arc::new(snapshot.policy),
            candidates: Arc::new(candidates),
            report: Arc::new(report),
        };
        Ok(Self {
            shared: Arc::new(Shared {
                current: RwLock::new(committed),
                whatif: Mutex::new(HashMap::new()),
                snapshot_path,
            }),
        })
    }

    pub fn revision(&self) -> u64 {
        self.read().revision
    }

    pub fn snapshot_path(&self) -> &Path {
        &self.shared.snapshot_path
    }

    pub(crate) fn read(&self) -> Committed {
        self.shared.current.read().expect("state lock").clone()
    }

    /// Runs `f` against the current revision under the writer lock. When it
    /// returns a change, the next revision is persisted and then published.
    pub(crate) fn mutate<R>(
        &self,
        expected: Option<u64>,
        f: impl FnOnce(&Committed) -> Result<(Change, R), ApiError>,
    ) -> Result<(u64, R), ApiError> {
        let mut guard = self.shared.current.write().expect("state lock");
        if let Some(expected) = expected {
            if expected != guard.revision {
                return Err(ApiError::RevisionMismatch { expected, current: guard.revision });
            }
        }
        let (change, out) = f(&guard)?;
        let (community, report) = match change.community {
            Some(c) => {
                let report = simulate(&c).map_err(RecommendError::from)?;
                (Arc::new(c), Arc::new(report))
            }
            None => (guard.community.clone(), guard.report.clone()),
        };
        let next = Committed {
            revision: guard.revision + 1,
            community,
            model: guard.model.clone(),
            policy: guard.policy.clone(),
            candidates: Arc::new(change.candidates),
            report,
        };
        next.snapshot().write_atomic(&self.shared.snapshot_path)?;
        *guard = next;
        tracing::info!(revision = guard.revision, "committed");
        Ok((guard.revision, out))
    }

    pub(crate) fn cache_whatif(&self, revision: u64, rec: Recommendation) {
        self.shared.whatif.lock().expect("cache lock").insert(rec.candidate_id.clone(), (revision, rec));
    }

    pub(crate) fn cached_whatif(&self, candidate_id: &str) -> Option<(u64, Recommendation)> {
        self.shared.whatif.lock().expect("cache lock").get(candidate_id).cloned()
    }

    pub(crate) fn forget_whatif(&self, candidate_id: &str) {
        self.shared.whatif.lock().expect("cache lock").remove(candidate_id);
    }
}

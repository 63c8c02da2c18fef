use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::uncompute::UncomputableDecomposition;

/// Largest oracle width whose truth table is cached.
const TABLE_LIMIT: usize = 26;

type Predicate = Arc<dyn Fn(u64) -> bool + Send + Sync>;

/// A diagonal ±1 oracle `|x⟩ ↦ (−1)^{f(x)}|x⟩` on `num_qubits` qubits.
///
/// Inputs are integers whose most significant of `num_qubits` bits is the
/// first qubit the oracle is called on.
#[derive(Clone)]
pub struct PhaseOracleSpec {
    num_qubits: usize,
    predicate: Predicate,
    marked: Option<Arc<Vec<u64>>>,
    decomposition: Option<Arc<UncomputableDecomposition>>,
    table: Arc<OnceLock<Vec<bool>>>,
}

impl fmt::Debug for PhaseOracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseOracleSpec")
            .field("num_qubits", &self.num_qubits)
            .field("marked", &self.marked)
            .field("has_decomposition", &self.decomposition.is_some())
            .finish()
    }
}

impl PhaseOracleSpec {
    pub fn from_predicate(num_qubits: usize, f: impl Fn(u64) -> bool + Send + Sync + 'static) -> Self {
        assert!(num_qubits <= 63, "oracle inputs are limited to 63 bits");
        PhaseOracleSpec {
            num_qubits,
            predicate: Arc::new(f),
            marked: None,
            decomposition: None,
            table: Arc::new(OnceLock::new()),
        }
    }

    /// Oracle marking exactly the given elements.
    pub fn from_marked(num_qubits: usize, marked: impl IntoIterator<Item = u64>) -> Self {
        let mut list: Vec<u64> = marked.into_iter().collect();
        list.sort_unstable();
        list.dedup();
        assert!(list.iter().all(|&x| num_qubits >= 64 || x >> num_qubits == 0), "marked element out of range");
        let set = Arc::new(list);
        let lookup = Arc::clone(&set);
        let mut spec = Self::from_predicate(num_qubits, move |x| lookup.binary_search(&x).is_ok());
        spec.marked = Some(set);
        spec
    }

    pub fn single(num_qubits: usize, target: u64) -> Self {
        Self::from_marked(num_qubits, [target])
    }

    /// Attaches an uncomputable decomposition. Validation against the
    /// predicate is the caller's business; see
    /// [`UncomputableDecomposition::validate`].
    pub fn with_decomposition(mut self, dec: UncomputableDecomposition) -> Self {
        self.decomposition = Some(Arc::new(dec));
        self
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn is_marked(&self, x: u64) -> bool {
        match self.table_if_small() {
            Some(t) => t[x as usize],
            None => (self.predicate)(x),
        }
    }

    pub fn decomposition(&self) -> Option<&UncomputableDecomposition> {
        self.decomposition.as_deref()
    }

    /// The marked set, enumerated from the predicate when it was not given
    /// explicitly.
    pub fn marked_elements(&self) -> Vec<u64> {
        match &self.marked {
            Some(m) => m.as_ref().clone(),
            None => (0..1u64 << self.num_qubits).filter(|&x| self.is_marked(x)).collect(),
        }
    }

    pub fn marked_count(&self) -> usize {
        match &self.marked {
            Some(m) => m.len(),
            None => self.marked_elements().len(),
        }
    }

    pub(crate) fn table_if_small(&self) -> Option<&[bool]> {
        if self.num_qubits > TABLE_LIMIT {
            return None;
        }
        Some(self.table.get_or_init(|| (0..1u64 << self.num_qubits).map(|x| (self.predicate)(x)).collect()))
    }
}

/// Oracle tag → oracle, consulted whenever a circuit is simulated.
#[derive(Clone, Debug, Default)]
pub struct OracleBindings(BTreeMap<String, PhaseOracleSpec>);

impl OracleBindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, tag: impl Into<String>, spec: PhaseOracleSpec) -> Self {
        self.bind(tag, spec);
        self
    }

    pub fn bind(&mut self, tag: impl Into<String>, spec: PhaseOracleSpec) {
        self.0.insert(tag.into(), spec);
    }

    pub fn get(&self, tag: &str) -> Option<&PhaseOracleSpec> {
        self.0.get(tag)
    }
}

use serde::{Deserialize, Serialize};

/// Three-tier memory limits, in bytes. `None` means unset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemoryBudget {
    pub per_matrix: Option<u64>,
    pub new_matrix: Option<u64>,
    pub global: Option<u64>,
}

impl MemoryBudget {
    pub const fn unlimited() -> Self {
        MemoryBudget {
            per_matrix: None,
            new_matrix: None,
            global: None,
        }
    }

    pub const fn per_matrix(bytes: u64) -> Self {
        MemoryBudget {
            per_matrix: Some(bytes),
            new_matrix: None,
            global: None,
        }
    }

    /// Limit for any existing matrix: per-matrix, else new-matrix, else
    /// global, else unlimited.
    pub fn effective_per_matrix(&self) -> Option<u64> {
        self.per_matrix.or(self.new_matrix).or(self.global)
    }

    /// Limit for matrices produced during processing: new-matrix, else the
    /// per-matrix chain.
    pub fn effective_new_matrix(&self) -> Option<u64> {
        self.new_matrix.or(self.per_matrix).or(self.global)
    }

    pub fn is_unlimited(&self) -> bool {
        self.effective_per_matrix().is_none()
    }

    /// Bytes one tile may occupy so that a product's operand and output
    /// tiles together fit the global limit.
    pub fn tile_limit(&self, new: bool) -> Option<u64> {
        let own = if new {
            self.effective_new_matrix()
        } else {
            self.effective_per_matrix()
        };
        match (own, self.global) {
            (Some(a), Some(g)) => Some(a.min(g / 3)),
            (a, g) => a.or(g.map(|g| g / 3)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fallback_chain() {
        let none = MemoryBudget::unlimited();
        assert_eq!(none.effective_per_matrix(), None);
        let g = MemoryBudget {
            global: Some(30),
            ..none
        };
        assert_eq!(g.effective_per_matrix(), Some(30));
        assert_eq!(g.tile_limit(false), Some(10));
        let n = MemoryBudget {
            new_matrix: Some(20),
            ..g
        };
        assert_eq!(n.effective_per_matrix(), Some(20));
        let p = MemoryBudget {
            per_matrix: Some(5),
            ..n
        };
        assert_eq!(p.effective_per_matrix(), Some(5));
        assert_eq!(p.effective_new_matrix(), Some(20));
        assert_eq!(MemoryBudget::per_matrix(1024).effective_new_matrix(), Some(1024));
    }
}

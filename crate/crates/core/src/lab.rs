//! Assembles the one-particle and Fock-space objects of a run from a
//! [`RunConfig`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::Result;
use crate::fock::{build_fock, node_space, TruncatedFockSpace};
use crate::grid::{build_local_subspaces, build_test_family, make_grid, MomentumGrid, SubspaceBasis, TestFunctionFamily};
use crate::lub::{build_damped_restrictions, lub_iterate, CompactOperator, LubResult};
use crate::CMat;

pub struct Lab {
    pub config: RunConfig,
    pub grid: MomentumGrid,
    pub family: TestFunctionFamily,
    pub l_plus: SubspaceBasis,
    pub l_minus: SubspaceBasis,
    /// `S_{E,+}, S_{E,-}, S_{β,+}, S_{β,-}`.
    pub restrictions: Vec<CompactOperator>,
    pub lub: LubResult,
    /// Energy-capped space over the grid nodes below `E`.
    pub space: TruncatedFockSpace,
    /// Particle-number truncation over the leading `T`-eigenvectors.
    pub mode_space: TruncatedFockSpace,
}

impl Lab {
    pub fn build(config: &RunConfig) -> Result<Lab> {
        config.validate()?;
        let grid = make_grid(config.s, config.p_max, config.n_nodes, config.m)?;
        let family = build_test_family(&grid, config.r, config.family_count)?;
        let (l_plus, l_minus) = build_local_subspaces(&grid, &family)?;
        let restrictions = build_damped_restrictions(&grid, &l_plus, &l_minus, config.energy, config.beta)?.to_vec();
        let lub = lub_iterate(&grid, &restrictions, config.lub_tol, config.lub_max_iter)?;
        let space = node_space(&grid, config.energy, config.fock_dim_limit)?;
        let k = config.modes.min(lub.e.ncols()).max(1);
        let modes: CMat = lub.e.columns(0, k).into_owned();
        let mode_space = build_fock(&grid, &modes, config.n_max, None, config.fock_dim_limit)?;
        Ok(Lab { config: config.clone(), grid, family, l_plus, l_minus, restrictions, lub, space, mode_space })
    }

    pub fn m_e(&self) -> f64 {
        self.config.m_e()
    }

    /// Independent deterministic stream for one consumer of randomness.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.config.seed);
        r.set_stream(stream);
        r
    }
}

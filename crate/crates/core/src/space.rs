//! Board -> realised coordinate pipeline under a frozen model.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::ca::Board;
use crate::encoder::BoardEncoder;
use crate::score::CaPlusPlusScore;
use crate::zspace::ZModel;

/// Realised coordinate and CA++ score of one board.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub z: Vec<f64>,
    pub capp: CaPlusPlusScore,
}

impl Evaluation {
    pub fn f(&self) -> f64 {
        self.capp.f
    }
}

const CACHE_LIMIT: usize = 200_000;

#[derive(Debug, Default)]
struct Caches {
    evals: HashMap<Board, Arc<Evaluation>>,
    coords: HashMap<Board, Arc<Vec<f64>>>,
}

/// Frozen encoder plus model; results are memoised per board.
#[derive(Debug)]
pub struct BoardSpace {
    pub encoder: BoardEncoder,
    pub model: ZModel,
    cache: Mutex<Caches>,
}

impl Clone for BoardSpace {
    fn clone(&self) -> Self {
        BoardSpace::new(self.encoder, self.model.clone())
    }
}

impl BoardSpace {
    pub fn new(encoder: BoardEncoder, model: ZModel) -> Self {
        BoardSpace {
            encoder,
            model,
            cache: Mutex::new(Caches::default()),
        }
    }

    pub fn d_z(&self) -> usize {
        self.model.d_z()
    }

    /// Encode, project and score `b`.
    pub fn evaluate(&self, b: &Board) -> Arc<Evaluation> {
        if let Some(hit) = self.cache.lock().expect("cache lock").evals.get(b) {
            return Arc::clone(hit);
        }
        let (emb, capp) = self.encoder.encode_scored(b);
        let z = self.model.project(emb.as_slice()).expect("encoder and model dims agree");
        let eval = Arc::new(Evaluation { z, capp });
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.evals.len() >= CACHE_LIMIT {
            cache.evals.clear();
        }
        cache.evals.insert(b.clone(), Arc::clone(&eval));
        eval
    }

    /// Realised coordinates only; avoids the CA++ simulation when the
    /// encoder does not use it.
    pub fn project(&self, b: &Board) -> Arc<Vec<f64>> {
        {
            let cache = self.cache.lock().expect("cache lock");
            if let Some(hit) = cache.coords.get(b) {
                return Arc::clone(hit);
            }
            if let Some(hit) = cache.evals.get(b) {
                return Arc::new(hit.z.clone());
            }
        }
        if self.encoder.feature_scale != 0.0 {
            return Arc::new(self.evaluate(b).z.clone());
        }
        let emb = self.encoder.encode(b);
        let z = Arc::new(self.model.project(emb.as_slice()).expect("encoder and model dims agree"));
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.coords.len() >= CACHE_LIMIT {
            cache.coords.clear();
        }
        cache.coords.insert(b.clone(), Arc::clone(&z));
        z
    }

    pub fn cached(&self) -> usize {
        let c = self.cache.lock().expect("cache lock");
        c.evals.len() + c.coords.len()
    }
}

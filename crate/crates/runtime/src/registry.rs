use std::collections::HashMap;
use std::sync::Arc;

use crate::mem::Payload;

/// Arguments handed to a host function.
pub struct HostCall<'a> {
    pub inputs: &'a [Payload],
    pub params: &'a serde_json::Value,
    pub num_outputs: usize,
}

pub type HostFn = dyn Fn(&HostCall<'_>) -> Result<Vec<Payload>, String> + Send + Sync;

/// Host functions addressable by name from classical tasks.
#[derive(Clone, Default)]
pub struct FunctionRegistry {
    functions: HashMap<String, Arc<HostFn>>,
}

impl FunctionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with the built-in functions: `noop` (empty outputs),
    /// `concat` (inputs' bytes joined) and `cut.reconstruct`.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register("noop", |call| {
            Ok(vec![Payload::from(Vec::new()); call.num_outputs])
        });
        r.register("concat", |call| {
            let mut out = Vec::new();
            for p in call.inputs {
                out.extend_from_slice(p.as_bytes().ok_or("concat expects byte inputs")?);
            }
            Ok(vec![Payload::from(out); call.num_outputs])
        });
        r.register(crate::cut::RECONSTRUCT_FN, crate::cut::reconstruct_host);
        r
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        f: impl Fn(&HostCall<'_>) -> Result<Vec<Payload>, String> + Send + Sync + 'static,
    ) {
        self.functions.insert(name.into(), Arc::new(f));
    }

    pub fn get(&self, name: &str) -> Option<Arc<HostFn>> {
        self.functions.get(name).cloned()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.functions.contains_key(name)
    }
}

impl std::fmt::Debug for FunctionRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut names: Vec<_> = self.functions.keys().collect();
        names.sort();
        f.debug_struct("FunctionRegistry")
            .field("functions", &names)
            .finish()
    }
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::clock::Clock;

pub const DEFAULT_TOKEN_TTL_SECS: u64 = 3600;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrinterToken {
    pub printer_address: String,
    pub value: String,
    /// Clock seconds after which the token must not be used.
    pub expires_at: u64,
}

/// Access tokens per printer, reused until they expire.
#[derive(Debug, Default)]
pub struct TokenCache {
    ttl: u64,
    tokens: HashMap<String, PrinterToken>,
}

impl TokenCache {
    pub fn new(ttl: u64) -> TokenCache {
        TokenCache {
            ttl,
            tokens: HashMap::new(),
        }
    }

    pub fn ttl(&self) -> u64 {
        self.ttl
    }

    /// The cached token for `address`, or a fresh one from `handshake`.
    pub fn get_or_handshake<E>(
        &mut self,
        address: &str,
        clock: &dyn Clock,
        handshake: impl FnOnce() -> Result<String, E>,
    ) -> Result<PrinterToken, E> {
        let now = clock.now();
        if let Some(t) = self.tokens.get(address) {
            if now < t.expires_at {
                return Ok(t.clone());
            }
        }
        let token = PrinterToken {
            printer_address: address.to_string(),
            value: handshake()?,
            expires_at: now.saturating_add(self.ttl),
        };
        self.tokens.insert(address.to_string(), token.clone());
        Ok(token)
    }

    /// Drop the token for `address`, e.g. after the printer refused it.
    pub fn forget(&mut self, address: &str) {
        self.tokens.remove(address);
    }
}

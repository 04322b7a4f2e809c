//! Networked printers: the device contract and a simulated implementation.

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::slicer::gcode_layer_count;

pub const MOCK_SCHEME: &str = "mock://";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("printer {0} is unreachable")]
    Unreachable(String),
    #[error("printer refused access: {0}")]
    Rejected(String),
    #[error("access token not accepted")]
    Unauthorized,
    #[error("printer is busy with another job")]
    Busy,
    #[error("connection to the printer was lost")]
    Disconnected,
    #[error("printer has no active job")]
    NoJob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceState {
    Idle,
    Printing,
    Paused,
    Done,
    Stopped,
    Disconnected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceStatus {
    pub state: DeviceState,
    pub layer: u32,
    pub total_layers: u32,
    pub gcode_sha256: Option<String>,
}

/// What the server needs from a printer.
pub trait PrinterDevice: Send + Sync {
    fn address(&self) -> &str;
    fn handshake(&self) -> Result<String, DeviceError>;
    fn start(&self, token: &str, gcode: &str) -> Result<(), DeviceError>;
    fn pause(&self, token: &str) -> Result<(), DeviceError>;
    fn resume(&self, token: &str) -> Result<(), DeviceError>;
    fn stop(&self, token: &str) -> Result<(), DeviceError>;
    fn status(&self) -> DeviceStatus;
}

/// Finds printers by address.
pub trait PrinterNetwork: Send + Sync {
    fn connect(&self, address: &str) -> Result<Arc<dyn PrinterDevice>, DeviceError>;
    /// Advance every simulated device by one tick.
    fn tick(&self);
}

/// Failures to inject into a [`MockPrinter`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Faults {
    pub reject_handshake: bool,
    /// Lose the connection once this many layers are printed.
    pub drop_after_layer: Option<u32>,
}

#[derive(Debug, Default)]
struct Inner {
    handshakes: u32,
    tokens: HashSet<String>,
    faults: Faults,
    state: Option<DeviceState>,
    layer: u32,
    total: u32,
    gcode_sha256: Option<String>,
    received: Vec<String>,
}

/// A simulated printer that prints `layers_per_tick` layers per tick.
#[derive(Debug)]
pub struct MockPrinter {
    address: String,
    layers_per_tick: u32,
    inner: Mutex<Inner>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl MockPrinter {
    pub fn new(address: &str, layers_per_tick: u32) -> MockPrinter {
        MockPrinter {
            address: address.to_string(),
            layers_per_tick: layers_per_tick.max(1),
            inner: Mutex::new(Inner::default()),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn handshake_count(&self) -> u32 {
        self.lock().handshakes
    }

    /// Hashes of every G-code file received, oldest first.
    pub fn received_hashes(&self) -> Vec<String> {
        self.lock().received.clone()
    }

    pub fn inject(&self, faults: Faults) {
        self.lock().faults = faults;
    }

    /// Invalidate every issued token, as a printer reboot would.
    pub fn revoke_tokens(&self) {
        self.lock().tokens.clear();
    }

    pub fn tick(&self) {
        let mut g = self.lock();
        if g.state != Some(DeviceState::Printing) {
            return;
        }
        g.layer = (g.layer + self.layers_per_tick).min(g.total);
        if let Some(limit) = g.faults.drop_after_layer {
            if g.layer >= limit {
                g.layer = limit.min(g.total);
                g.state = Some(DeviceState::Disconnected);
                return;
            }
        }
        if g.layer == g.total {
            g.state = Some(DeviceState::Done);
        }
    }

    fn authorized(&self, g: &Inner, token: &str) -> Result<(), DeviceError> {
        if g.state == Some(DeviceState::Disconnected) {
            return Err(DeviceError::Disconnected);
        }
        if g.tokens.contains(token) {
            Ok(())
        } else {
            Err(DeviceError::Unauthorized)
        }
    }
}

impl PrinterDevice for MockPrinter {
    fn address(&self) -> &str {
        &self.address
    }

    fn handshake(&self) -> Result<String, DeviceError> {
        let mut g = self.lock();
        g.handshakes += 1;
        if g.faults.reject_handshake {
            return Err(DeviceError::Rejected("access denied by the printer".into()));
        }
        let token = format!("{}#{}", self.address, g.handshakes);
        g.tokens.insert(token.clone());
        Ok(token)
    }

    fn start(&self, token: &str, gcode: &str) -> Result<(), DeviceError> {
        let mut g = self.lock();
        self.authorized(&g, token)?;
        if matches!(g.state, Some(DeviceState::Printing | DeviceState::Paused)) {
            return Err(DeviceError::Busy);
        }
        let hash = sha256_hex(gcode.as_bytes());
        g.received.push(hash.clone());
        g.gcode_sha256 = Some(hash);
        g.total = gcode_layer_count(gcode);
        g.layer = 0;
        g.state = Some(if g.total == 0 { DeviceState::Done } else { DeviceState::Printing });
        Ok(())
    }

    fn pause(&self, token: &str) -> Result<(), DeviceError> {
        let mut g = self.lock();
        self.authorized(&g, token)?;
        match g.state {
            Some(DeviceState::Printing) => {
                g.state = Some(DeviceState::Paused);
                Ok(())
            }
            _ => Err(DeviceError::NoJob),
        }
    }

    fn resume(&self, token: &str) -> Result<(), DeviceError> {
        let mut g = self.lock();
        self.authorized(&g, token)?;
        match g.state {
            Some(DeviceState::Paused) => {
                g.state = Some(DeviceState::Printing);
                Ok(())
            }
            _ => Err(DeviceError::NoJob),
        }
    }

    fn stop(&self, token: &str) -> Result<(), DeviceError> {
        let mut g = self.lock();
        self.authorized(&g, token)?;
        match g.state {
            Some(DeviceState::Printing | DeviceState::Paused) => {
                g.state = Some(DeviceState::Stopped);
                Ok(())
            }
            _ => Err(DeviceError::NoJob),
        }
    }

    fn status(&self) -> DeviceStatus {
        let g = self.lock();
        DeviceStatus {
            state: g.state.unwrap_or(DeviceState::Idle),
            layer: g.layer,
            total_layers: g.total,
            gcode_sha256: g.gcode_sha256.clone(),
        }
    }
}

/// Simulated printers, created on first contact for `mock://` addresses.
/// Other addresses are unreachable.
#[derive(Debug)]
pub struct MockNetwork {
    layers_per_tick: u32,
    printers: Mutex<BTreeMap<String, Arc<MockPrinter>>>,
}

impl MockNetwork {
    pub fn new(layers_per_tick: u32) -> MockNetwork {
        MockNetwork {
            layers_per_tick,
            printers: Mutex::new(BTreeMap::new()),
        }
    }

    fn map(&self) -> MutexGuard<'_, BTreeMap<String, Arc<MockPrinter>>> {
        self.printers.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// The simulated printer at `address`, created if needed.
    pub fn printer(&self, address: &str) -> Option<Arc<MockPrinter>> {
        if !address.starts_with(MOCK_SCHEME) || address.len() == MOCK_SCHEME.len() {
            return None;
        }
        Some(
            self.map()
                .entry(address.to_string())
                .or_insert_with(|| Arc::new(MockPrinter::new(address, self.layers_per_tick)))
                .clone(),
        )
    }
}

impl PrinterNetwork for MockNetwork {
    fn connect(&self, address: &str) -> Result<Arc<dyn PrinterDevice>, DeviceError> {
        self.printer(address)
            .map(|p| p as Arc<dyn PrinterDevice>)
            .ok_or_else(|| DeviceError::Unreachable(address.to_string()))
    }

    fn tick(&self) {
        let printers: Vec<_> = self.map().values().cloned().collect();
        for p in printers {
            p.tick();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GCODE: &str = "; layer_count: 50\n;LAYER:0\n";

    #[test]
    fn fifty_layers_in_fifty_ticks() {
        let p = MockPrinter::new("mock://a", 1);
        let t = p.handshake().unwrap();
        p.start(&t, GCODE).unwrap();
        for _ in 0..49 {
            p.tick();
        }
        assert_eq!(p.status().state, DeviceState::Printing);
        p.tick();
        assert_eq!(p.status().state, DeviceState::Done);
        assert_eq!(p.status().layer, 50);
        assert_eq!(p.received_hashes(), vec![sha256_hex(GCODE.as_bytes())]);
    }

    #[test]
    fn pause_freezes_and_stop_ends() {
        let p = MockPrinter::new("mock://a", 1);
        let t = p.handshake().unwrap();
        p.start(&t, GCODE).unwrap();
        for _ in 0..10 {
            p.tick();
        }
        p.pause(&t).unwrap();
        p.tick();
        assert_eq!(p.status().layer, 10);
        assert_eq!(p.pause(&t), Err(DeviceError::NoJob));
        p.stop(&t).unwrap();
        assert_eq!(p.status().state, DeviceState::Stopped);
        assert_eq!(p.status().layer, 10);
    }

    #[test]
    fn faults() {
        let p = MockPrinter::new("mock://a", 1);
        p.inject(Faults {
            reject_handshake: true,
            drop_after_layer: None,
        });
        assert!(matches!(p.handshake(), Err(DeviceError::Rejected(_))));
        assert_eq!(p.handshake_count(), 1);
        p.inject(Faults {
            reject_handshake: false,
            drop_after_layer: Some(5),
        });
        let t = p.handshake().unwrap();
        assert_eq!(p.start("forged", GCODE), Err(DeviceError::Unauthorized));
        p.start(&t, GCODE).unwrap();
        assert_eq!(p.start(&t, GCODE), Err(DeviceError::Busy));
        for _ in 0..8 {
            p.tick();
        }
        assert_eq!(p.status().state, DeviceState::Disconnected);
        assert_eq!(p.status().layer, 5);
    }

    #[test]
    fn network_addresses() {
        let n = MockNetwork::new(1);
        assert!(n.connect("mock://a").is_ok());
        assert!(Arc::ptr_eq(&n.printer("mock://a").unwrap(), &n.printer("mock://a").unwrap()));
        assert!(matches!(n.connect("10.0.0.7:80"), Err(DeviceError::Unreachable(_))));
        assert!(n.connect("mock://").is_err());
    }
}

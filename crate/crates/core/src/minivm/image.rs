//! On-disk target image: `"MVM1"`, then entry, handler, period and ram_size as
//! little-endian u32, then raw ROM bytes.

use crate::emu::EmuError;

use super::{RAM_MAX, ROM_ALIAS};

pub const MAGIC: &[u8; 4] = b"MVM1";
const HEADER_LEN: usize = 20;
const NONE_HANDLER: u32 = 0xFFFF_FFFF;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TargetImage {
    pub rom: Vec<u8>,
    pub entry: u32,
    pub handler: Option<u32>,
    /// Timer interrupt every `period` instructions.
    pub period: Option<u32>,
    pub ram_size: u32,
}

impl TargetImage {
    /// Whether an 8-byte instruction can be fetched at `addr`.
    pub fn is_executable(&self, addr: u64) -> bool {
        self.rom_offset(addr, 8).is_some()
    }

    /// ROM offset of `[addr, addr+len)` through either the base mapping or the flash alias.
    pub fn rom_offset(&self, addr: u64, len: u64) -> Option<usize> {
        let off = if addr < ROM_ALIAS as u64 {
            addr
        } else {
            addr.checked_sub(ROM_ALIAS as u64)?
        };
        (off.checked_add(len)? <= self.rom.len() as u64).then_some(off as usize)
    }

    pub fn validate(&self) -> Result<(), EmuError> {
        let bad = |m: &str| Err(EmuError::Image(m.to_string()));
        if self.rom.is_empty() {
            return bad("empty ROM");
        }
        if self.rom.len() as u64 >= ROM_ALIAS as u64 {
            return bad("ROM larger than the flash alias window");
        }
        if !self.is_executable(self.entry as u64) {
            return bad("entry outside ROM");
        }
        if let Some(h) = self.handler {
            if !self.is_executable(h as u64) {
                return bad("interrupt handler outside ROM");
            }
        }
        if self.period.is_some() && self.handler.is_none() {
            return bad("interrupt period without a handler");
        }
        if self.period == Some(0) {
            return bad("interrupt period of zero");
        }
        if self.ram_size == 0 || self.ram_size > RAM_MAX {
            return bad("RAM size must be in 1..=16 MiB");
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.rom.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.entry.to_le_bytes());
        out.extend_from_slice(&self.handler.unwrap_or(NONE_HANDLER).to_le_bytes());
        out.extend_from_slice(&self.period.unwrap_or(0).to_le_bytes());
        out.extend_from_slice(&self.ram_size.to_le_bytes());
        out.extend_from_slice(&self.rom);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TargetImage, EmuError> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(EmuError::Image("missing MVM1 header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let handler = word(8);
        let period = word(12);
        let img = TargetImage {
            rom: bytes[HEADER_LEN..].to_vec(),
            entry: word(4),
            handler: (handler != NONE_HANDLER).then_some(handler),
            period: (period != 0).then_some(period),
            ram_size: word(16),
        };
        img.validate()?;
        Ok(img)
    }
}

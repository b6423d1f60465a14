//! minivm: a small deterministic MCU used as the reference backend.
//!
//! Memory map:
//!
//! | range | use |
//! |---|---|
//! | `0x0000_0000 + rom` | ROM, execute and read |
//! | `0x0800_0000 + rom` | flash alias of the same ROM |
//! | `0x2000_0000 + ram_size` | RAM; `sp` starts at its top |
//! | `0x4000_0000 + 0x1000` | MMIO window; loads consume input bytes |
//!
//! A timer interrupt (if configured) fires after every `period` executed
//! instructions while not already in the handler. Entry saves the register
//! file, pushes the interrupted pc on the shadow stack, sets `lr` to
//! `EXC_RETURN` and jumps to the handler; `RET` with `lr == EXC_RETURN` resumes.

pub mod asm;
pub mod image;
pub mod isa;
mod machine;

pub use asm::{assemble, assemble_with_labels, AsmError};
pub use image::TargetImage;
pub use machine::{MachineState, MiniVm};

pub const ROM_ALIAS: u32 = 0x0800_0000;
pub const RAM_BASE: u32 = 0x2000_0000;
pub const RAM_MAX: u32 = 16 << 20;
pub const MMIO_BASE: u32 = 0x4000_0000;
pub const MMIO_SIZE: u32 = 0x1000;
pub const EXC_RETURN: u32 = 0xFFFF_FFF9;

/// Validate `image` and return a backend for it.
pub fn load_target(image: TargetImage) -> Result<MiniVm, crate::emu::EmuError> {
    MiniVm::new(image)
}

pub mod emu;
pub mod minivm;
pub mod raven;
pub mod oracle;
pub mod replay;
pub mod fixtures;
pub mod analysis;

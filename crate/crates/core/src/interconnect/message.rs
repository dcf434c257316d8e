use serde::{Deserialize, Serialize};

use super::SimError;

pub const CMD_BITS: u32 = 1;
pub const SITE_BITS: u32 = 7;
pub const BANK_BITS: u32 = 1;
pub const WORD_BITS: u32 = 32;
pub const DATA_BITS: u32 = 32;
/// Site, bank and word address together.
pub const ADDR_BITS: u32 = SITE_BITS + BANK_BITS + WORD_BITS;
pub const H2B_BITS: u32 = CMD_BITS + ADDR_BITS + DATA_BITS;
pub const B2H_BITS: u32 = SITE_BITS + WORD_BITS + DATA_BITS;
/// One h2b plus one b2h message: everything a hop carries besides handshakes.
pub const BUNDLE_BITS: u32 = H2B_BITS + B2H_BITS;
pub const MAX_SITES: usize = 1 << SITE_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bank {
    Periphery,
    User,
}

/// Periphery bank word addresses.
pub const REG_RSTN_SOFT: u32 = 0;
pub const REG_EN: u32 = 1;
pub const REG_EN_PWR_BAR: u32 = 2;

/// Host-to-block request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct H2BMessage {
    pub command: Command,
    pub site: u8,
    pub bank: Bank,
    pub word: u32,
    pub data: u32,
}

impl H2BMessage {
    pub fn read(site: u8, bank: Bank, word: u32) -> Self {
        H2BMessage { command: Command::Read, site, bank, word, data: 0 }
    }

    pub fn write(site: u8, bank: Bank, word: u32, data: u32) -> Self {
        H2BMessage { command: Command::Write, site, bank, word, data }
    }

    /// The 40-bit address: site, then bank, then word.
    pub fn addr(&self) -> u64 {
        (u64::from(self.site) << (BANK_BITS + WORD_BITS)) | (u64::from(self.bank == Bank::User) << WORD_BITS) | u64::from(self.word)
    }

    pub fn from_addr(command: Command, addr: u64, data: u32) -> Result<Self, SimError> {
        if addr >> ADDR_BITS != 0 {
            return Err(SimError::Malformed(format!("address {addr:#x} is wider than {ADDR_BITS} bits")));
        }
        Ok(H2BMessage {
            command,
            site: (addr >> (BANK_BITS + WORD_BITS)) as u8,
            bank: if (addr >> WORD_BITS) & 1 == 1 { Bank::User } else { Bank::Periphery },
            word: addr as u32,
            data,
        })
    }

    /// Command in the top bit, then the address, then data.
    pub fn encode(&self) -> u128 {
        (u128::from(self.command == Command::Write) << (ADDR_BITS + DATA_BITS))
            | (u128::from(self.addr()) << DATA_BITS)
            | u128::from(self.data)
    }

    pub fn decode(bits: u128) -> Result<Self, SimError> {
        if bits >> H2B_BITS != 0 {
            return Err(SimError::Malformed(format!("h2b word {bits:#x} is wider than {H2B_BITS} bits")));
        }
        let command = if bits >> (ADDR_BITS + DATA_BITS) == 1 { Command::Write } else { Command::Read };
        let addr = ((bits >> DATA_BITS) as u64) & ((1 << ADDR_BITS) - 1);
        H2BMessage::from_addr(command, addr, bits as u32)
    }
}

/// Block-to-host response to a read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct B2HMessage {
    pub site: u8,
    pub word: u32,
    pub data: u32,
}

impl B2HMessage {
    pub fn encode(&self) -> u128 {
        (u128::from(self.site) << (WORD_BITS + DATA_BITS)) | (u128::from(self.word) << DATA_BITS) | u128::from(self.data)
    }

    pub fn decode(bits: u128) -> Result<Self, SimError> {
        if bits >> B2H_BITS != 0 {
            return Err(SimError::Malformed(format!("b2h word {bits:#x} is wider than {B2H_BITS} bits")));
        }
        Ok(B2HMessage { site: (bits >> (WORD_BITS + DATA_BITS)) as u8, word: (bits >> DATA_BITS) as u32, data: bits as u32 })
    }
}

/// Zero-padded hex of a `width`-bit payload.
pub fn hex(bits: u128, width: u32) -> String {
    format!("{:0w$x}", bits, w = width.div_ceil(4) as usize)
}

//! Memory-mapped reads and writes over an eight-site chain.
//!
//! cargo run --example interconnect_mmio

use sitepack::interconnect::{Bank, H2BMessage, Network, SimError, REG_EN_PWR_BAR, REG_RSTN_SOFT};

fn addr(site: u8, bank: Bank, word: u32) -> u64 {
    H2BMessage::read(site, bank, word).addr()
}

fn main() -> Result<(), SimError> {
    let mut net = Network::new(8)?;
    net.activate_site(5)?;
    net.mmio_write(addr(5, Bank::User, 0x10), 0xdead_beef)?;
    let v = net.mmio_read(addr(5, Bank::User, 0x10))?;
    println!("site 5 word 0x10 = {v:#x} at cycle {}", net.cycle());

    // powering a site down blanks its user bank until it comes back
    net.mmio_write(addr(5, Bank::Periphery, REG_EN_PWR_BAR), 1)?;
    println!("powered down: {:#x}", net.mmio_read(addr(5, Bank::User, 0x10))?);
    net.mmio_write(addr(5, Bank::Periphery, REG_EN_PWR_BAR), 0)?;
    println!("powered up:   {:#x}", net.mmio_read(addr(5, Bank::User, 0x10))?);

    net.mmio_write(addr(5, Bank::Periphery, REG_RSTN_SOFT), 0)?;
    net.mmio_write(addr(5, Bank::Periphery, REG_RSTN_SOFT), 1)?;
    println!("after reset:  {:#x}", net.mmio_read(addr(5, Bank::User, 0x10))?);

    net.activate_site(2)?;
    net.drain(1000)?;
    println!("active site {:?}, enabled count {}", net.active_site(), net.active_count());

    match net.mmio_read(addr(9, Bank::User, 0)) {
        Err(e) => println!("read past the end: {e}"),
        Ok(v) => println!("read past the end returned {v}"),
    }
    let s = net.stats();
    println!("{} requests, {} responses, {} dropped, {} cycles", s.injected, s.delivered, s.dropped, net.cycle());
    Ok(())
}

//! Container serialisation: arithmetic-coded block masks, packed block
//! images and the file header.

mod arith;
mod container;
mod pack;

pub use arith::{arith_decode, arith_encode};
pub use container::{
    from_fixed, quantize_params, read_container, to_fixed, write_container, Container, HEADER_LEN, MAGIC,
    MAX_PIXELS, VERSION,
};
pub use pack::{pack_blocks, packed_layout, unpack_blocks, PACK_FILL};

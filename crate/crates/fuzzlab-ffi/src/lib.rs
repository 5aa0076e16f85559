// C ABI surface; filled in once the core crate is complete.

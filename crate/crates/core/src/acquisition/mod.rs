//! Modbus master side: a fixed-rate poll loop feeding an append-only sample
//! store, plus replay of stored series.

mod poller;
mod store;

pub use poller::{poll_loop, PollConfig, PollError, PollSummary};
pub use store::{
    read_series, StoreEntry, StoreError, StoreMeta, StoreWriter, StoredSeries, CODEC_VERSION,
    COLUMNS,
};

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use sketchbot_gateway::{router, GatewayConfig};

#[derive(Debug, Parser)]
#[command(name = "sketchbot-gateway", version, about = "HTTP gateway for sketchbot")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080", env = "SKETCHBOT_BIND")]
    bind: SocketAddr,
    /// Directory holding scenes/ and assets/
    #[arg(long, env = "SKETCHBOT_DATA_DIR", value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// Allowed CORS origin; repeat for several [default: any]
    #[arg(long = "allow-origin", value_name = "ORIGIN")]
    allowed_origins: Vec<String>,
    /// Largest accepted request body in bytes
    #[arg(long, default_value_t = 16 * 1024 * 1024)]
    max_body_bytes: usize,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let app = router(GatewayConfig {
        data_dir: args.data_dir,
        allowed_origins: args.allowed_origins,
        max_body_bytes: args.max_body_bytes,
    });
    let listener = tokio::net::TcpListener::bind(args.bind).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}

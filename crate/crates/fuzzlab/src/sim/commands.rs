//! The benign command list shared by the PtH and TELNET drivers, and the
//! command classes the AUTHP header carries.

/// AUTHP command classes.
pub mod cmd_class {
    pub const NONE: u64 = 0;
    pub const READ: u64 = 1;
    pub const WRITE: u64 = 2;
    pub const NET: u64 = 3;
    pub const SHELL: u64 = 4;
}

/// 32 fixed benign commands: file reads, writes, and network interactions.
pub const BENIGN_COMMANDS: [(&str, u64); 32] = [
    ("cat /var/log/syslog", cmd_class::READ),
    ("ls -la /home/operator", cmd_class::READ),
    ("head -n 40 /etc/services", cmd_class::READ),
    ("tail -f /var/log/auth.log", cmd_class::READ),
    ("wc -l /etc/passwd", cmd_class::READ),
    ("file /usr/local/bin/agent", cmd_class::READ),
    ("stat /srv/share/report.pdf", cmd_class::READ),
    ("md5sum /srv/share/build.tar.gz", cmd_class::READ),
    ("grep -c error /var/log/app.log", cmd_class::READ),
    ("du -sh /srv/share", cmd_class::READ),
    ("find /tmp -name '*.lock'", cmd_class::READ),
    ("cp report.pdf /srv/share/archive/", cmd_class::WRITE),
    ("mv draft.txt final.txt", cmd_class::WRITE),
    ("touch /tmp/heartbeat", cmd_class::WRITE),
    ("mkdir -p /srv/share/2024/q3", cmd_class::WRITE),
    ("rm /tmp/stale.lock", cmd_class::WRITE),
    ("tee -a /var/log/ops.log", cmd_class::WRITE),
    ("tar czf backup.tar.gz /home/operator/docs", cmd_class::WRITE),
    ("gzip -k measurements.csv", cmd_class::WRITE),
    ("chmod 640 /srv/share/report.pdf", cmd_class::WRITE),
    ("ln -s /srv/share current", cmd_class::WRITE),
    ("sed -i s/stage/prod/ config.ini", cmd_class::WRITE),
    ("ping -c 2 10.0.0.2", cmd_class::NET),
    ("curl -s http://10.0.0.2/status", cmd_class::NET),
    ("wget -q http://10.0.0.2/manifest", cmd_class::NET),
    ("ssh operator@10.0.0.2 uptime", cmd_class::NET),
    ("scp notes.txt operator@10.0.0.2:", cmd_class::NET),
    ("dig @10.0.0.2 files.lab", cmd_class::NET),
    ("netstat -tn", cmd_class::NET),
    ("ip route show", cmd_class::NET),
    ("traceroute -m 4 10.0.0.2", cmd_class::NET),
    ("arp -a", cmd_class::NET),
];

pub fn pick_command(rng: &mut crate::rng::Rng) -> (&'static str, u64) {
    use rand::Rng as _;
    BENIGN_COMMANDS[rng.gen_range(0..BENIGN_COMMANDS.len())]
}

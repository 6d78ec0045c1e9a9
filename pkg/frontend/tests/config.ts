export const SERVER_PORT = 8751;
export const BASE_URL = `http://127.0.0.1:${SERVER_PORT}`;

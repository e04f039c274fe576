package basic

import "errors"

type Server struct {
	Addr    string
	handler func(string) error
}

func (s *Server) Serve() error {
	if s.handler == nil {
		return errors.New("no handler")
	}
	return s.handler(s.Addr)
}

func (s Server) String() string { return "server(" + s.Addr + ")" }

func NewServer(addr string) *Server {
	return &Server{Addr: addr, handler: func(string) error { return nil }}
}

func (s *Server) Close() error {
	s.handler = nil
	return nil
}
